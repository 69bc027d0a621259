/**
 * Composition root: loads the catalog, resolves the traces the current
 * mode needs (converting on demand when one is missing), and wires the
 * cross-view interactions:
 *   pin button / projection click -> comparison view gains a unit,
 *   projection hover and curve hover -> step view preview,
 *   metric bar hover -> best sample's curves and projection.
 */

import { Catalog, TraceApi } from './api.js';
import { defaultComparisonSteps, StateStore } from './state.js';
import { ComparisonView } from './views/comparison-view.js';
import { ControlPanel } from './views/control-panel.js';
import { MetricView } from './views/metric-view.js';
import { ProjectionView } from './views/projection-view.js';
import { StepView } from './views/step-view.js';

export class App {
  readonly store: StateStore;
  readonly controlPanel: ControlPanel;
  readonly stepView: StepView;
  readonly comparisonView: ComparisonView;
  readonly projectionView: ProjectionView;
  readonly metricView: MetricView;
  private catalog: Catalog;
  private lastModeKey = '';

  private constructor(
    readonly root: HTMLElement,
    private api: TraceApi,
    catalog: Catalog,
    maxStep: number,
  ) {
    this.catalog = catalog;
    this.store = new StateStore(maxStep);

    const top = document.createElement('div');
    top.className = 'layout-top';
    const middle = document.createElement('div');
    middle.className = 'layout-middle';
    const bottom = document.createElement('div');
    bottom.className = 'layout-bottom';
    root.append(top, middle, bottom);

    this.metricView = new MetricView(top, this.store, api);
    this.projectionView = new ProjectionView(top, this.store, api);
    this.stepView = new StepView(middle, this.store, api);
    this.comparisonView = new ComparisonView(bottom, this.store, api);
    this.controlPanel = new ControlPanel(bottom, this.store, catalog);

    this.controlPanel.setPinHandler(() => this.pinCurrentStep());
    this.projectionView.setPinHandler((traceId, step) => this.pinStep(traceId, step));
    this.comparisonView.setCurveHoverHandler((step) => this.store.setStep(step));
    this.metricView.setBestSampleHandler((traceId) => void this.loadBestSample(traceId));

    this.store.subscribe(() => void this.syncTraces());
  }

  static async create(root: HTMLElement, api: TraceApi): Promise<App> {
    const catalog = await api.catalog();
    const anyTrace = Object.values(catalog.traces)[0];
    const maxStep = anyTrace ? Math.max(...anyTrace.steps) : 99;
    const app = new App(root, api, catalog, maxStep);
    await app.metricView.load();
    await app.syncTraces();
    await app.pinDefaultUnits();
    return app;
  }

  /** Trace ids required by the current mode and selections. */
  private requiredJobs(): { source_singer: number; song: number; target_singer: number }[] {
    const { mode, selections } = this.store.get();
    const src = selections.sourceSingers;
    const song = selections.songs;
    const tgt = selections.targetSingers;
    switch (mode) {
      case 'SourceSingerComparison':
        return [
          { source_singer: src[0], song: song[0], target_singer: tgt[0] },
          { source_singer: src[1], song: song[0], target_singer: tgt[0] },
        ];
      case 'SongComparison':
        return [
          { source_singer: src[0], song: song[0], target_singer: tgt[0] },
          { source_singer: src[0], song: song[1], target_singer: tgt[0] },
        ];
      case 'TargetSingerComparison':
        return [
          { source_singer: src[0], song: song[0], target_singer: tgt[0] },
          { source_singer: src[0], song: song[0], target_singer: tgt[1] },
        ];
      default:
        return [{ source_singer: src[0], song: song[0], target_singer: tgt[0] }];
    }
  }

  private findTrace(job: { source_singer: number; song: number; target_singer: number }) {
    for (const [traceId, entry] of Object.entries(this.catalog.traces)) {
      if (
        entry.job.source_singer === job.source_singer &&
        entry.job.song === job.song &&
        entry.job.target_singer === job.target_singer
      ) {
        return traceId;
      }
    }
    return null;
  }

  private async syncTraces(): Promise<void> {
    const state = this.store.get();
    const key = `${state.mode}|${JSON.stringify(state.selections)}`;
    if (key === this.lastModeKey) return;
    this.lastModeKey = key;

    const traces: string[] = [];
    for (const job of this.requiredJobs()) {
      let traceId = this.findTrace(job);
      if (!traceId) {
        try {
          traceId = await this.api.convert(job);
          this.catalog = await this.api.catalog();
        } catch {
          continue; // conversion runtime unavailable; skip the panel
        }
      }
      traces.push(traceId);
    }
    if (traces.join() !== state.activeTraces.join()) {
      this.store.update({ activeTraces: traces });
    }
  }

  private async pinDefaultUnits(): Promise<void> {
    // step-comparison default: three units at the scaled analogs of the
    // full-scale defaults (last step, a tenth, a hundredth)
    const state = this.store.get();
    const traceId = state.activeTraces[0];
    if (!traceId) return;
    for (const step of defaultComparisonSteps(state.maxStep + 1)) {
      this.pinStep(traceId, step);
    }
  }

  pinCurrentStep(): void {
    const state = this.store.get();
    const traceId = state.activeTraces[0];
    if (traceId) this.pinStep(traceId, state.currentStep);
  }

  pinStep(traceId: string, step: number): void {
    this.store.pinUnit({ traceId, step, caption: `step ${step}` });
  }

  private async loadBestSample(traceId: string): Promise<void> {
    await this.comparisonView.showCurvesFor(traceId);
    this.store.update({ activeTraces: [traceId] });
  }
}

export async function mount(rootId: string, api: TraceApi): Promise<App> {
  const root = document.getElementById(rootId);
  if (!root) throw new Error(`no element #${rootId}`);
  return App.create(root, api);
}
