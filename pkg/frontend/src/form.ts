/** Client-side checks for the metadata form. The service validates again;
 * these exist so an obviously incomplete form never reaches the network. */

export interface MetadataFields {
  subject_id: string;
  age_range: string;
  sex: string;
  dominant_leg: string;
}

export const LEG_CHOICES = ["left", "right"] as const;

/** Problems that block submission; an empty list means go. */
export function validateMetadata(fields: MetadataFields): string[] {
  const problems: string[] = [];
  if (fields.subject_id.trim() === "") {
    problems.push("subject_id is required");
  }
  if (!(LEG_CHOICES as readonly string[]).includes(fields.dominant_leg)) {
    problems.push("choose a dominant leg");
  }
  return problems;
}
