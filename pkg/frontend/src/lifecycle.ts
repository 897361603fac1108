/** Session lifecycle model, built from the service's own transition table
 * (GET /api/lifecycle) so the buttons can never invent an edge the service
 * would refuse. */

import type { LifecycleTable } from "./types.js";

/** Control actions exposed in the UI, each naming the state it enters. */
export const ACTION_TARGETS = {
  calibrate: "calibrating",
  record: "recording",
  stop: "stopped",
} as const;

export type LifecycleAction = keyof typeof ACTION_TARGETS;

export const ACTIONS = Object.keys(ACTION_TARGETS) as LifecycleAction[];

export class LifecycleModel {
  constructor(private readonly table: LifecycleTable) {}

  states(): string[] {
    return Object.keys(this.table);
  }

  /** Is `from -> to` an edge of the service's table? */
  canEnter(from: string, to: string): boolean {
    return (this.table[from] ?? []).includes(to);
  }

  allows(state: string, action: LifecycleAction): boolean {
    return this.canEnter(state, ACTION_TARGETS[action]);
  }

  enabledActions(state: string): LifecycleAction[] {
    return ACTIONS.filter((action) => this.allows(state, action));
  }

  isTerminal(state: string): boolean {
    return (this.table[state] ?? []).length === 0;
  }

  /**
   * Sanity pass over the table itself: every edge target must be a
   * tabulated state, and some button must be able to follow it. A table
   * failing here could put the service in a state this UI cannot drive.
   */
  check(): string[] {
    const problems: string[] = [];
    const reachable = new Set<string>(Object.values(ACTION_TARGETS));
    for (const [state, nextStates] of Object.entries(this.table)) {
      for (const next of nextStates) {
        if (!(next in this.table)) {
          problems.push(`dangling target ${state} -> ${next}`);
        }
        if (!reachable.has(next)) {
          problems.push(`no button reaches ${next}`);
        }
      }
    }
    return problems;
  }
}
