/**
 * Metric view: pool-level summary in two histograms, split by polarity
 * (raw scores where higher is better, log scores where lower is better).
 * Hovering a bar selects the best-performing sample for that metric and
 * hands it to the drill-down callback; the "?" button opens a dialog with
 * metric definitions.
 */

import { MetricsSummary, TraceApi } from '../api.js';
import { StateStore } from '../state.js';

const METRIC_HELP: Record<string, string> = {
  Dembed:
    'Singer similarity: cosine similarity between timbre embeddings of the conversion and the target reference. Higher is better.',
  F0CORR:
    'Pearson correlation between the F0 contours of the conversion and the source. Higher is better.',
  FAD: 'Frechet distance between Gaussian fits of embedding sets. Lower is better.',
  F0RMSE: 'Root mean square F0 error on jointly voiced frames, in Hz. Lower is better.',
  MCD: 'Mel-cepstral distortion in dB along the aligned frame path. Lower is better.',
};

export class MetricView {
  readonly root: HTMLElement;
  private summary: MetricsSummary | null = null;
  private dialog: HTMLElement;
  private onBestSample: ((traceId: string, kind: string) => void) | null = null;

  constructor(
    parent: HTMLElement,
    private store: StateStore,
    private api: TraceApi,
  ) {
    this.root = document.createElement('section');
    this.root.className = 'metric-view';
    this.dialog = document.createElement('div');
    this.dialog.className = 'metric-help-dialog';
    this.dialog.hidden = true;
    parent.appendChild(this.root);
  }

  setBestSampleHandler(fn: (traceId: string, kind: string) => void): void {
    this.onBestSample = fn;
  }

  async load(): Promise<void> {
    try {
      this.summary = await this.api.metricsSummary();
    } catch {
      this.summary = null;
    }
    this.render();
  }

  private render(): void {
    this.root.innerHTML = '';
    const header = document.createElement('div');
    header.className = 'metric-header';
    const title = document.createElement('span');
    title.textContent = this.summary
      ? `Pool of ${this.summary.pool_size} conversions`
      : 'No evaluated pool yet';
    const help = document.createElement('button');
    help.className = 'metric-help-button';
    help.textContent = '?';
    help.addEventListener('click', () => this.toggleHelp());
    header.append(title, help);
    this.root.appendChild(header);
    this.root.appendChild(this.dialog);

    if (!this.summary) {
      const empty = document.createElement('div');
      empty.className = 'metric-empty';
      empty.textContent = 'run the metrics evaluation to populate this view';
      this.root.appendChild(empty);
      return;
    }

    const higher = document.createElement('div');
    higher.className = 'metric-group higher-better';
    higher.appendChild(this.groupTitle('scores (higher is better)'));
    const lower = document.createElement('div');
    lower.className = 'metric-group lower-better';
    lower.appendChild(this.groupTitle('log scores (lower is better)'));

    for (const [kind, polarity] of Object.entries(this.summary.polarity)) {
      const bar = this.buildBar(kind, polarity === 'higher_better');
      (polarity === 'higher_better' ? higher : lower).appendChild(bar);
    }
    this.root.append(higher, lower);
  }

  private groupTitle(text: string): HTMLElement {
    const el = document.createElement('div');
    el.className = 'metric-group-title';
    el.textContent = text;
    return el;
  }

  private buildBar(kind: string, higherBetter: boolean): HTMLElement {
    const summary = this.summary!;
    const wrap = document.createElement('div');
    wrap.className = 'metric-bar';
    wrap.dataset.kind = kind;
    const value = summary.display[kind];
    const label = document.createElement('span');
    label.className = 'metric-bar-label';
    label.textContent = `${kind}: ${value === null || value === undefined ? 'n/a' : value.toFixed(3)}`;
    const fill = document.createElement('div');
    fill.className = 'metric-bar-fill';
    const magnitude = value === null || value === undefined ? 0 : Math.min(1, Math.abs(value) / 5);
    fill.style.width = `${Math.round(20 + magnitude * 80)}%`;
    wrap.append(fill, label);
    wrap.addEventListener('mouseenter', () => void this.drillDown(kind));
    return wrap;
  }

  private async drillDown(kind: string): Promise<void> {
    this.store.update({ selectedMetric: kind });
    try {
      const best = await this.api.bestSample(kind);
      this.root.dataset.bestSample = best;
      this.onBestSample?.(best, kind);
    } catch {
      // no best sample recorded; the hover is a no-op
    }
  }

  private toggleHelp(): void {
    if (!this.dialog.hidden) {
      this.dialog.hidden = true;
      return;
    }
    this.dialog.innerHTML = '';
    const list = document.createElement('dl');
    for (const [kind, text] of Object.entries(METRIC_HELP)) {
      const term = document.createElement('dt');
      term.textContent = kind;
      const def = document.createElement('dd');
      def.textContent = text;
      list.append(term, def);
    }
    this.dialog.appendChild(list);
    this.dialog.hidden = false;
  }
}
