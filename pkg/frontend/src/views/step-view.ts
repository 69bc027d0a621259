/**
 * Step view: the denoising animation. One panel in step mode, two
 * side-by-side panels in condition-comparison modes. Scrubbing the step
 * slider (or hovering the projection) swaps in that step's stored mel and
 * pitch contour; autoplay advances the step at a fixed cadence.
 */

import { TraceApi } from '../api.js';
import { MelRenderer, ZoomRegion } from '../mel-renderer.js';
import { StateStore } from '../state.js';

const AUTOPLAY_STEPS_PER_SECOND = 10;

export class StepView {
  readonly root: HTMLElement;
  private renderers: MelRenderer[] = [];
  private panels: HTMLElement[] = [];
  private playing = false;
  private timer: ReturnType<typeof setInterval> | null = null;
  private fetchToken = 0;
  private lastTraces: string[] = [];

  constructor(
    parent: HTMLElement,
    private store: StateStore,
    private api: TraceApi,
  ) {
    this.root = document.createElement('section');
    this.root.className = 'step-view';
    parent.appendChild(this.root);
    store.subscribe(() => this.sync());
    this.sync();
  }

  private rebuildPanels(traces: string[]): void {
    this.root.innerHTML = '';
    this.renderers = [];
    this.panels = [];

    const controls = document.createElement('div');
    controls.className = 'step-view-controls';
    const play = document.createElement('button');
    play.className = 'autoplay-toggle';
    play.textContent = this.playing ? 'Pause' : 'Play';
    play.addEventListener('click', () => this.togglePlay());
    const reset = document.createElement('button');
    reset.className = 'zoom-reset';
    reset.textContent = 'Reset zoom';
    reset.addEventListener('click', () => this.setZoom(null));
    controls.append(play, reset);
    this.root.appendChild(controls);

    const row = document.createElement('div');
    row.className = 'step-panels';
    this.root.appendChild(row);
    for (const traceId of traces) {
      const panel = document.createElement('div');
      panel.className = 'step-panel';
      panel.dataset.traceId = traceId;
      const caption = document.createElement('div');
      caption.className = 'step-caption';
      panel.appendChild(caption);
      const renderer = new MelRenderer(panel);
      this.attachBrush(renderer);
      row.appendChild(panel);
      this.panels.push(panel);
      this.renderers.push(renderer);
    }
  }

  private attachBrush(renderer: MelRenderer): void {
    let dragStart: number | null = null;
    renderer.canvas.addEventListener('mousedown', (ev) => {
      dragStart = ev.offsetX;
    });
    renderer.canvas.addEventListener('mouseup', (ev) => {
      if (dragStart === null) return;
      const frames = Number(renderer.canvas.dataset.frames ?? 0);
      if (frames > 0 && Math.abs(ev.offsetX - dragStart) > 4) {
        const toFrame = (x: number) =>
          Math.round((x / renderer.canvas.width) * frames);
        const region = {
          frameStart: Math.min(toFrame(dragStart), toFrame(ev.offsetX)),
          frameEnd: Math.max(toFrame(dragStart), toFrame(ev.offsetX)),
        };
        this.setZoom(region); // brushing one panel magnifies all mels
      }
      dragStart = null;
    });
  }

  setZoom(region: ZoomRegion | null): void {
    for (const renderer of this.renderers) renderer.setZoom(region);
    this.root.dataset.zoom = region ? `${region.frameStart}-${region.frameEnd}` : '';
  }

  private togglePlay(): void {
    this.playing = !this.playing;
    if (this.timer) {
      clearInterval(this.timer);
      this.timer = null;
    }
    if (this.playing) {
      this.timer = setInterval(() => {
        const state = this.store.get();
        const next = state.currentStep - 1;
        this.store.setStep(next < 0 ? state.maxStep : next);
      }, 1000 / AUTOPLAY_STEPS_PER_SECOND);
    }
    const button = this.root.querySelector('.autoplay-toggle');
    if (button) button.textContent = this.playing ? 'Pause' : 'Play';
  }

  private sync(): void {
    const state = this.store.get();
    const traces = state.activeTraces;
    if (traces.join() !== this.lastTraces.join()) {
      this.lastTraces = [...traces];
      this.rebuildPanels(traces);
    }
    void this.loadStep(state.currentStep);
  }

  private async loadStep(step: number): Promise<void> {
    const token = ++this.fetchToken;
    await Promise.all(
      this.lastTraces.map(async (traceId, i) => {
        try {
          const [mel, f0] = await Promise.all([
            this.api.mel(traceId, step),
            this.api.f0(traceId, step).catch(() => null),
          ]);
          if (token !== this.fetchToken) return; // superseded scrub
          const panel = this.panels[i];
          panel.dataset.step = String(step);
          const caption = panel.querySelector('.step-caption');
          if (caption) caption.textContent = `${traceId}  step ${step}`;
          this.renderers[i].draw(mel, f0 ? f0.values : null);
          panel.classList.remove('step-gap');
        } catch {
          if (token !== this.fetchToken) return;
          const panel = this.panels[i];
          if (panel) panel.classList.add('step-gap'); // missing data indicator
        }
      }),
    );
  }
}
