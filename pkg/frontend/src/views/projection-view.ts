/**
 * Projection view: the 2D trajectory of step embeddings. Hovering a point
 * scrubs the step view to that step; clicking pins the step's display
 * unit; the wheel zooms; a toggle shows step numbers. In condition modes
 * two trajectories share one space with distinct colors.
 */

import { ProjectionDoc, TraceApi } from '../api.js';
import { EMBEDDING_CHOICES, StateStore } from '../state.js';

const TRACE_COLORS = ['#1f77b4', '#d62728'];

export class ProjectionView {
  readonly root: HTMLElement;
  private svg: SVGSVGElement;
  private toggle: HTMLInputElement;
  private zoomScale = 1;
  private docs: { traceId: string; doc: ProjectionDoc }[] = [];
  private lastKey = '';
  private onPinStep: ((traceId: string, step: number) => void) | null = null;

  constructor(
    parent: HTMLElement,
    private store: StateStore,
    private api: TraceApi,
  ) {
    this.root = document.createElement('section');
    this.root.className = 'projection-view';
    const bar = document.createElement('div');
    bar.className = 'projection-bar';
    const label = document.createElement('label');
    this.toggle = document.createElement('input');
    this.toggle.type = 'checkbox';
    this.toggle.className = 'show-step-numbers';
    this.toggle.addEventListener('change', () =>
      this.store.update({ showStepNumbers: this.toggle.checked }),
    );
    label.append(this.toggle, document.createTextNode(' Show Step Number'));
    bar.appendChild(label);

    this.svg = document.createElementNS('http://www.w3.org/2000/svg', 'svg');
    this.svg.setAttribute('width', '420');
    this.svg.setAttribute('height', '360');
    this.svg.classList.add('projection-svg');
    this.svg.addEventListener('wheel', (ev) => {
      ev.preventDefault();
      const factor = (ev as WheelEvent).deltaY < 0 ? 1.15 : 1 / 1.15;
      this.zoomScale = Math.min(20, Math.max(0.05, this.zoomScale * factor));
      this.draw();
    });

    this.root.append(bar, this.svg);
    parent.appendChild(this.root);
    store.subscribe(() => void this.sync());
    void this.sync();
  }

  setPinHandler(fn: (traceId: string, step: number) => void): void {
    this.onPinStep = fn;
  }

  private async sync(): Promise<void> {
    const state = this.store.get();
    const choice = EMBEDDING_CHOICES[state.embeddingChoice];
    const key = `${state.activeTraces.join()}|${state.embeddingChoice}|${state.showStepNumbers}`;
    if (key === this.lastKey) {
      this.draw();
      return;
    }
    this.lastKey = key;
    this.toggle.checked = state.showStepNumbers;
    this.docs = [];
    for (const traceId of state.activeTraces) {
      try {
        const doc = await this.api.projection(traceId, choice.embedding, choice.layer);
        this.docs.push({ traceId, doc });
      } catch {
        // trace without stored projection: leave the panel empty
      }
    }
    this.draw();
  }

  private draw(): void {
    const state = this.store.get();
    this.svg.innerHTML = '';
    if (!this.docs.length) return;

    const all = this.docs.flatMap(({ doc }) => doc.points);
    const xs = all.map((p) => p[0]);
    const ys = all.map((p) => p[1]);
    const cx = (Math.min(...xs) + Math.max(...xs)) / 2;
    const cy = (Math.min(...ys) + Math.max(...ys)) / 2;
    const span = Math.max(
      Math.max(...xs) - Math.min(...xs),
      Math.max(...ys) - Math.min(...ys),
      1e-9,
    );
    const width = 420;
    const height = 360;
    const scale = ((Math.min(width, height) - 40) / span) * this.zoomScale;
    const px = (p: [number, number]) => 0.5 * width + (p[0] - cx) * scale;
    const py = (p: [number, number]) => 0.5 * height + (p[1] - cy) * scale;

    this.docs.forEach(({ traceId, doc }, t) => {
      const color = TRACE_COLORS[t % TRACE_COLORS.length];
      const path = document.createElementNS('http://www.w3.org/2000/svg', 'path');
      const d = doc.points
        .map((p, i) => `${i === 0 ? 'M' : 'L'}${px(p).toFixed(1)},${py(p).toFixed(1)}`)
        .join(' ');
      path.setAttribute('d', d);
      path.setAttribute('fill', 'none');
      path.setAttribute('stroke', color);
      path.setAttribute('opacity', '0.5');
      path.classList.add('trajectory');
      this.svg.appendChild(path);

      doc.points.forEach((p, i) => {
        const step = doc.steps[i];
        const dot = document.createElementNS('http://www.w3.org/2000/svg', 'circle');
        dot.setAttribute('cx', px(p).toFixed(1));
        dot.setAttribute('cy', py(p).toFixed(1));
        dot.setAttribute('r', step === state.currentStep ? '5' : '3');
        dot.setAttribute('fill', color);
        dot.classList.add('step-point');
        dot.dataset.step = String(step);
        dot.dataset.traceId = traceId;
        dot.addEventListener('mouseenter', () => this.store.setStep(step));
        dot.addEventListener('click', () => this.onPinStep?.(traceId, step));
        this.svg.appendChild(dot);

        if (state.showStepNumbers) {
          const text = document.createElementNS('http://www.w3.org/2000/svg', 'text');
          text.setAttribute('x', (px(p) + 5).toFixed(1));
          text.setAttribute('y', (py(p) - 4).toFixed(1));
          text.setAttribute('font-size', '8');
          text.classList.add('step-label');
          text.textContent = String(step);
          this.svg.appendChild(text);
        }
      });
    });
  }
}
