/**
 * The five-point rating scale. Option order is fixed: the keyboard keys
 * 1-5 and the on-screen buttons both follow it, best to worst.
 */

export interface ScoreOption {
  /** 1-based position; doubles as the keyboard shortcut. */
  readonly key: number;
  /** Value submitted to the service. */
  readonly value: number;
  readonly label: string;
}

export const SCORE_OPTIONS: readonly ScoreOption[] = [
  { key: 1, value: 1.0, label: "Accurate and complete" },
  { key: 2, value: 0.75, label: "Accurate but missing key information" },
  { key: 3, value: 0.5, label: "Minor errors" },
  { key: 4, value: 0.25, label: "Serious errors" },
  { key: 5, value: 0.0, label: "Does not describe the image" },
];
