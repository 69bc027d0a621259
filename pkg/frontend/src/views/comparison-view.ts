/**
 * Comparison view: a row of basic display units (audio player + mel
 * heatmap + F0 overlay + checkbox + drag handle + caption). Checking
 * exactly two units pops up the mel-difference heatmap; a third check is
 * refused. In metric mode the row is replaced by the metric-curve panel.
 */

import { CurveDoc, TraceApi } from '../api.js';
import { MelRenderer } from '../mel-renderer.js';
import { PinnedUnit, StateStore } from '../state.js';

const METRIC_COLORS: Record<string, string> = {
  Dembed: '#1f77b4',
  F0CORR: '#2ca02c',
  FAD: '#d62728',
  F0RMSE: '#9467bd',
  MCD: '#ff7f0e',
};

export class ComparisonView {
  readonly root: HTMLElement;
  private unitsRow: HTMLElement;
  private diffPopup: HTMLElement;
  private curvePanel: HTMLElement;
  private curveData: Record<string, CurveDoc> | null = null;
  private curveTraceId: string | null = null;
  private onCurveHoverStep: ((step: number) => void) | null = null;

  constructor(
    parent: HTMLElement,
    private store: StateStore,
    private api: TraceApi,
  ) {
    this.root = document.createElement('section');
    this.root.className = 'comparison-view';
    this.unitsRow = document.createElement('div');
    this.unitsRow.className = 'display-units';
    this.diffPopup = document.createElement('div');
    this.diffPopup.className = 'mel-diff-popup';
    this.diffPopup.hidden = true;
    this.curvePanel = document.createElement('div');
    this.curvePanel.className = 'metric-curve-panel';
    this.curvePanel.hidden = true;
    this.root.append(this.unitsRow, this.diffPopup, this.curvePanel);
    parent.appendChild(this.root);
    store.subscribe(() => this.render());
    this.render();
  }

  setCurveHoverHandler(fn: (step: number) => void): void {
    this.onCurveHoverStep = fn;
  }

  /** Load a trace's stored metric curves into the curve panel. */
  async showCurvesFor(traceId: string): Promise<void> {
    this.curveData = await this.api.traceMetrics(traceId);
    this.curveTraceId = traceId;
    this.renderCurves();
  }

  private render(): void {
    const state = this.store.get();
    const metricMode = state.mode === 'MetricComparison';
    this.unitsRow.hidden = metricMode;
    this.curvePanel.hidden = !metricMode;
    if (metricMode) {
      this.renderCurves();
    } else {
      this.renderUnits();
    }
    void this.renderDiff();
  }

  private renderUnits(): void {
    const state = this.store.get();
    this.unitsRow.innerHTML = '';
    state.pinnedUnits.forEach((unit, index) => {
      this.unitsRow.appendChild(this.buildUnit(unit, index));
    });
  }

  private buildUnit(unit: PinnedUnit, index: number): HTMLElement {
    const state = this.store.get();
    const box = document.createElement('div');
    box.className = 'display-unit';
    box.dataset.index = String(index);
    box.dataset.caption = unit.caption;
    box.draggable = true;

    const header = document.createElement('div');
    header.className = 'unit-header';
    const checkbox = document.createElement('input');
    checkbox.type = 'checkbox';
    checkbox.className = 'unit-checkbox';
    checkbox.checked = state.checkedUnits.includes(index);
    checkbox.addEventListener('change', () => {
      if (checkbox.checked) {
        const accepted = this.store.toggleUnitCheck(index);
        if (!accepted) {
          checkbox.checked = false; // third selection refused
          box.dataset.refused = 'true';
        }
      } else {
        this.store.toggleUnitCheck(index);
      }
    });
    const handle = document.createElement('span');
    handle.className = 'drag-handle';
    handle.textContent = '::';
    const caption = document.createElement('span');
    caption.className = 'unit-caption';
    caption.textContent = unit.caption;
    header.append(checkbox, handle, caption);
    box.appendChild(header);

    const audio = document.createElement('audio');
    audio.className = 'unit-audio';
    audio.controls = true;
    audio.preload = 'none'; // renders are fetched lazily on focus
    audio.addEventListener('focus', () => {
      if (!audio.src) audio.src = this.api.audioUrl(unit.traceId, unit.step);
    });
    audio.addEventListener('play', () => {
      if (!audio.src) audio.src = this.api.audioUrl(unit.traceId, unit.step);
    });
    box.appendChild(audio);

    const renderer = new MelRenderer(box, { width: 320, height: 120 });
    void (async () => {
      try {
        const [mel, f0] = await Promise.all([
          this.api.mel(unit.traceId, unit.step),
          this.api.f0(unit.traceId, unit.step).catch(() => null),
        ]);
        renderer.draw(mel, f0 ? f0.values : null);
      } catch {
        box.classList.add('unit-error');
      }
    })();

    box.addEventListener('dragstart', (ev) => {
      ev.dataTransfer?.setData('text/plain', String(index));
    });
    box.addEventListener('dragover', (ev) => ev.preventDefault());
    box.addEventListener('drop', (ev) => {
      ev.preventDefault();
      const from = Number(ev.dataTransfer?.getData('text/plain'));
      if (!Number.isNaN(from)) this.store.movePinnedUnit(from, index);
    });
    return box;
  }

  private async renderDiff(): Promise<void> {
    const pair = this.store.diffPair;
    if (!pair) {
      this.diffPopup.hidden = true;
      this.diffPopup.innerHTML = '';
      return;
    }
    const [a, b] = pair;
    this.diffPopup.hidden = false;
    this.diffPopup.innerHTML = '';
    const title = document.createElement('div');
    title.className = 'diff-title';
    title.textContent = `Mel difference: ${a.caption} vs ${b.caption} (warm = large)`;
    this.diffPopup.appendChild(title);
    try {
      const diff = await this.api.melDiff(
        { traceId: a.traceId, step: a.step },
        { traceId: b.traceId, step: b.step },
      );
      const renderer = new MelRenderer(this.diffPopup, { diverging: true });
      renderer.draw(diff);
      this.diffPopup.dataset.pair = `${a.caption}|${b.caption}`;
    } catch (err) {
      const note = document.createElement('div');
      note.className = 'diff-error';
      note.textContent = `difference unavailable: ${(err as Error).message}`;
      this.diffPopup.appendChild(note);
    }
  }

  private renderCurves(): void {
    this.curvePanel.innerHTML = '';
    if (!this.curveData) {
      const empty = document.createElement('div');
      empty.className = 'curve-empty';
      empty.textContent = 'hover a metric bar to load the best sample’s curves';
      this.curvePanel.appendChild(empty);
      return;
    }
    const title = document.createElement('div');
    title.className = 'curve-title';
    title.textContent = `Metric curves over diffusion step: ${this.curveTraceId}`;
    this.curvePanel.appendChild(title);

    const legend = document.createElement('div');
    legend.className = 'curve-legend';
    for (const kind of Object.keys(this.curveData)) {
      const chip = document.createElement('span');
      chip.className = 'legend-chip';
      chip.textContent = kind;
      chip.style.color = METRIC_COLORS[kind] ?? '#333';
      legend.appendChild(chip);
    }
    this.curvePanel.appendChild(legend);

    const width = 640;
    const height = 220;
    const svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
    svg.setAttribute('width', String(width));
    svg.setAttribute('height', String(height));
    svg.classList.add('curve-svg');

    const kinds = Object.entries(this.curveData);
    for (const [kind, curve] of kinds) {
      const finite = curve.values
        .map((v, i) => [curve.steps[i], v] as [number, number | null])
        .filter(([, v]) => v !== null) as [number, number][];
      if (finite.length < 2) continue;
      const values = finite.map(([, v]) => v);
      const lo = Math.min(...values);
      const hi = Math.max(...values);
      const range = hi - lo || 1;
      const maxStep = Math.max(...curve.steps);
      const path = finite
        .map(([step, v], i) => {
          const x = (1 - step / maxStep) * (width - 20) + 10;
          const y = height - 15 - ((v - lo) / range) * (height - 30);
          return `${i === 0 ? 'M' : 'L'}${x.toFixed(1)},${y.toFixed(1)}`;
        })
        .join(' ');
      const el = document.createElementNS('http://www.w3.org/2000/svg', 'path');
      el.setAttribute('d', path);
      el.setAttribute('fill', 'none');
      el.setAttribute('stroke', METRIC_COLORS[kind] ?? '#333');
      el.dataset.kind = kind;
      svg.appendChild(el);
    }

    const readout = document.createElement('div');
    readout.className = 'curve-readout';
    svg.addEventListener('mousemove', (ev) => {
      const steps = kinds[0]?.[1].steps ?? [];
      if (!steps.length) return;
      const maxStep = Math.max(...steps);
      const frac = Math.min(1, Math.max(0, ((ev as MouseEvent).offsetX - 10) / (width - 20)));
      const step = Math.round((1 - frac) * maxStep);
      const parts = kinds
        .map(([kind, curve]) => {
          const at = curve.steps.indexOf(step);
          const v = at >= 0 ? curve.values[at] : null;
          return `${kind}=${v === null || v === undefined ? 'gap' : v.toFixed(3)}`;
        })
        .join('  ');
      readout.textContent = `step ${step}: ${parts}`;
      readout.dataset.step = String(step);
      this.onCurveHoverStep?.(step); // the step preview follows the cursor
    });

    this.curvePanel.append(svg, readout);
  }
}
