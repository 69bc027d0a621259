/**
 * Central view state. Every panel renders as a pure function of this
 * store, so mode switches can never leave stale panels behind.
 */

export const DISPLAY_MODES = [
  'StepComparison',
  'SourceSingerComparison',
  'SongComparison',
  'TargetSingerComparison',
  'MetricComparison',
] as const;

export type DisplayMode = (typeof DISPLAY_MODES)[number];

export const EMBEDDING_CHOICES = [
  { embedding: 'step', layer: null, label: 'Step' },
  { embedding: 'step_noise', layer: 'first', label: 'Step+Noise (first layer)' },
  { embedding: 'step_noise', layer: 'middle', label: 'Step+Noise (middle layer)' },
  { embedding: 'step_noise', layer: 'last', label: 'Step+Noise (final layer)' },
  { embedding: 'step_noise_cond', layer: 'first', label: 'Step+Noise+Condition (first layer)' },
  { embedding: 'step_noise_cond', layer: 'middle', label: 'Step+Noise+Condition (middle layer)' },
  { embedding: 'step_noise_cond', layer: 'last', label: 'Step+Noise+Condition (final layer)' },
] as const;

export interface Selections {
  sourceSingers: number[]; // two entries only in SourceSingerComparison
  songs: number[]; // two entries only in SongComparison
  targetSingers: number[]; // two entries only in TargetSingerComparison
}

export interface PinnedUnit {
  traceId: string;
  step: number;
  caption: string;
}

export interface ViewState {
  mode: DisplayMode;
  selections: Selections;
  embeddingChoice: number; // index into EMBEDDING_CHOICES
  currentStep: number;
  maxStep: number; // slider upper bound = T - 1 from trace meta
  pinnedUnits: PinnedUnit[];
  checkedUnits: number[]; // indices into pinnedUnits; at most two
  selectedMetric: string | null;
  activeTraces: string[]; // one trace in Step mode, two in condition modes
  showStepNumbers: boolean;
}

/** Number of condition slots per mode: [sources, songs, targets]. */
export function selectionShape(mode: DisplayMode): [number, number, number] {
  switch (mode) {
    case 'SourceSingerComparison':
      return [2, 1, 1];
    case 'SongComparison':
      return [1, 2, 1];
    case 'TargetSingerComparison':
      return [1, 1, 2];
    default:
      return [1, 1, 1];
  }
}

/** Default comparison steps scale with the schedule length:
 * last step, a tenth, and a hundredth of it. */
export function defaultComparisonSteps(maxStepCount: number): number[] {
  const top = maxStepCount - 1;
  return [top, Math.max(1, Math.floor(maxStepCount / 10)), Math.max(0, Math.floor(maxStepCount / 100))];
}

type Listener = (state: ViewState) => void;

export class StateStore {
  private state: ViewState;
  private listeners: Listener[] = [];

  constructor(maxStep = 99) {
    this.state = {
      mode: 'StepComparison',
      selections: { sourceSingers: [0], songs: [0], targetSingers: [1] },
      embeddingChoice: 0,
      currentStep: maxStep,
      maxStep,
      pinnedUnits: [],
      checkedUnits: [],
      selectedMetric: null,
      activeTraces: [],
      showStepNumbers: false,
    };
  }

  get(): ViewState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  update(patch: Partial<ViewState>): void {
    this.state = { ...this.state, ...patch };
    for (const listener of this.listeners) listener(this.state);
  }

  setMode(mode: DisplayMode): void {
    const [nSources, nSongs, nTargets] = selectionShape(mode);
    const sel = this.state.selections;
    const resize = (xs: number[], n: number, fallback: number) => {
      const out = xs.slice(0, n);
      while (out.length < n) out.push((out[out.length - 1] ?? fallback) + 1);
      return out;
    };
    this.update({
      mode,
      selections: {
        sourceSingers: resize(sel.sourceSingers, nSources, 0),
        songs: resize(sel.songs, nSongs, 0),
        targetSingers: resize(sel.targetSingers, nTargets, 0),
      },
      checkedUnits: [],
    });
  }

  setStep(step: number): void {
    const clamped = Math.max(0, Math.min(this.state.maxStep, Math.round(step)));
    this.update({ currentStep: clamped });
  }

  pinUnit(unit: PinnedUnit): void {
    this.update({ pinnedUnits: [...this.state.pinnedUnits, unit] });
  }

  movePinnedUnit(from: number, to: number): void {
    const units = [...this.state.pinnedUnits];
    if (from < 0 || from >= units.length || to < 0 || to >= units.length) return;
    const [moved] = units.splice(from, 1);
    units.splice(to, 0, moved);
    // checked indices follow their units
    const remap = (idx: number) => units.indexOf(this.state.pinnedUnits[idx]);
    this.update({
      pinnedUnits: units,
      checkedUnits: this.state.checkedUnits.map(remap),
    });
  }

  /** Toggle a unit checkbox; a third simultaneous check is refused. */
  toggleUnitCheck(index: number): boolean {
    const checked = [...this.state.checkedUnits];
    const at = checked.indexOf(index);
    if (at >= 0) {
      checked.splice(at, 1);
      this.update({ checkedUnits: checked });
      return true;
    }
    if (checked.length >= 2) return false;
    checked.push(index);
    this.update({ checkedUnits: checked });
    return true;
  }

  get diffPair(): [PinnedUnit, PinnedUnit] | null {
    const { checkedUnits, pinnedUnits } = this.state;
    if (checkedUnits.length !== 2) return null;
    return [pinnedUnits[checkedUnits[0]], pinnedUnits[checkedUnits[1]]];
  }
}
