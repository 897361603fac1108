"""squatlink: a simulated wireless EMG + IMU squat analysis chain.

Device side: ground-truth squat kinematics, synthetic IMU/EMG streams,
complementary-filter fusion, EMG envelope smoothing, and a framed
binary telemetry stream at the 15 ms loop rate.  Host side: frame
parsing with loss accounting, session lifecycle with standing
calibration, repetition and summary analytics, CSV export with a
metadata sidecar, figure reports, and an HTTP control plane with a
server-sent live feed.
"""

from .errors import (
    ConfigurationError,
    ConformanceError,
    DegenerateOrientationError,
    ExportError,
    FramingError,
    InputError,
    InsufficientDataError,
    SquatLinkError,
    StateError,
    TimingError,
    TransportClosedError,
)
from .fusion import (
    DEFAULT_CALIBRATION_WINDOW_S,
    DEFAULT_FILTER_ALPHA,
    NOMINAL_DT_S,
    CalibrationOffset,
    ComplementaryFilterState,
    ImuSample,
    KneeState,
    Segment,
    SegmentTilt,
    calibrate_offset,
    complementary_update,
    derive_kinematics,
    knee_angle,
    segment_tilt,
    tilt_from_accel,
    wrap_angle_deg,
)
from .emg import (
    ADC_FULL_SCALE_V,
    ADC_MAX_COUNTS,
    DEFAULT_EMG_ALPHA,
    EmgChannel,
    EmgChannelState,
    EmgSummary,
    channel_summary,
    counts_to_volts,
    emg_update,
    volts_to_counts,
)
from .protocol import (
    DEFAULT_PORT,
    FRAME_LEN,
    PACKET_LEN,
    DecodedPacket,
    FrameParser,
    LinkConfig,
    LinkStats,
    LoopbackTransport,
    TelemetryPacket,
    UdpTransport,
    crc16_ccitt,
    decode_packet,
    encode_frame,
    encode_packet,
)
from .session import (
    CSV_COLUMNS,
    LIFECYCLE_TRANSITIONS,
    Leg,
    RepSpan,
    SessionMetadata,
    SessionRecord,
    SessionState,
    SessionStore,
    SessionSummary,
    detect_repetitions,
    export_csv,
    reconstruct_time,
    summarize,
)
from .simulator import (
    DeviceSeries,
    NoiseModel,
    SquatProfile,
    TruthSeries,
    device_frames,
    device_series,
    generate_truth,
    run_device,
    synthesize_emg,
    synthesize_imu,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
