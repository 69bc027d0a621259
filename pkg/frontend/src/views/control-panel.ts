/**
 * Control panel: display-mode dropdown, condition dropdowns (their count
 * follows the mode), projection-embedding dropdown, and the step
 * controller (slider + numeric tooltip + Pin button).
 */

import { Catalog } from '../api.js';
import {
  DISPLAY_MODES,
  DisplayMode,
  EMBEDDING_CHOICES,
  StateStore,
  selectionShape,
} from '../state.js';

export class ControlPanel {
  readonly root: HTMLElement;
  private onPin: (() => void) | null = null;

  constructor(
    parent: HTMLElement,
    private store: StateStore,
    private catalog: Catalog,
  ) {
    this.root = document.createElement('section');
    this.root.className = 'control-panel';
    parent.appendChild(this.root);
    this.render();
    store.subscribe(() => this.render());
  }

  setPinHandler(fn: () => void): void {
    this.onPin = fn;
  }

  private render(): void {
    const state = this.store.get();
    this.root.innerHTML = '';

    const modeSelect = document.createElement('select');
    modeSelect.className = 'mode-select';
    for (const mode of DISPLAY_MODES) {
      const option = document.createElement('option');
      option.value = mode;
      option.textContent = mode.replace(/([A-Z])/g, ' $1').trim();
      option.selected = mode === state.mode;
      modeSelect.appendChild(option);
    }
    modeSelect.addEventListener('change', () =>
      this.store.setMode(modeSelect.value as DisplayMode),
    );
    this.root.appendChild(this.labelled('Display Mode', modeSelect));

    const [nSources, nSongs, nTargets] = selectionShape(state.mode);
    this.conditionDropdowns('source-singer', 'Source Singer', nSources, state.selections.sourceSingers,
      this.catalog.singers.map((s) => `Singer ${s.singer_id}`),
      (idx, value) => {
        const xs = [...this.store.get().selections.sourceSingers];
        xs[idx] = value;
        this.store.update({ selections: { ...this.store.get().selections, sourceSingers: xs } });
      });
    this.conditionDropdowns('song', 'Source Song', nSongs, state.selections.songs,
      this.catalog.songs.map((s) => `Song ${s.song_id}`),
      (idx, value) => {
        const xs = [...this.store.get().selections.songs];
        xs[idx] = value;
        this.store.update({ selections: { ...this.store.get().selections, songs: xs } });
      });
    this.conditionDropdowns('target-singer', 'Target Singer', nTargets, state.selections.targetSingers,
      this.catalog.singers.map((s) => `Singer ${s.singer_id}`),
      (idx, value) => {
        const xs = [...this.store.get().selections.targetSingers];
        xs[idx] = value;
        this.store.update({ selections: { ...this.store.get().selections, targetSingers: xs } });
      });

    const embeddingSelect = document.createElement('select');
    embeddingSelect.className = 'embedding-select';
    EMBEDDING_CHOICES.forEach((choice, i) => {
      const option = document.createElement('option');
      option.value = String(i);
      option.textContent = choice.label;
      option.selected = i === state.embeddingChoice;
      embeddingSelect.appendChild(option);
    });
    embeddingSelect.addEventListener('change', () =>
      this.store.update({ embeddingChoice: Number(embeddingSelect.value) }),
    );
    this.root.appendChild(this.labelled('Projection Embedding', embeddingSelect));

    // step controller: slider, numeric tooltip, pin
    const controller = document.createElement('div');
    controller.className = 'step-controller';
    const slider = document.createElement('input');
    slider.type = 'range';
    slider.className = 'step-slider';
    slider.min = '0';
    slider.max = String(state.maxStep);
    slider.value = String(state.currentStep);
    slider.addEventListener('input', () => this.store.setStep(Number(slider.value)));

    const tooltip = document.createElement('input');
    tooltip.type = 'number';
    tooltip.className = 'step-tooltip';
    tooltip.min = '0';
    tooltip.max = String(state.maxStep);
    tooltip.value = String(state.currentStep);
    tooltip.addEventListener('change', () => this.store.setStep(Number(tooltip.value)));

    const pin = document.createElement('button');
    pin.className = 'pin-button';
    pin.textContent = 'Pin';
    pin.addEventListener('click', () => this.onPin?.());

    controller.append(slider, tooltip, pin);
    this.root.appendChild(this.labelled('Step', controller));
  }

  private conditionDropdowns(
    cls: string,
    label: string,
    count: number,
    values: number[],
    optionLabels: string[],
    onChange: (idx: number, value: number) => void,
  ): void {
    for (let i = 0; i < count; i++) {
      const select = document.createElement('select');
      select.className = `${cls}-select`;
      optionLabels.forEach((text, v) => {
        const option = document.createElement('option');
        option.value = String(v);
        option.textContent = text;
        option.selected = v === values[i];
        select.appendChild(option);
      });
      select.addEventListener('change', () => onChange(i, Number(select.value)));
      this.root.appendChild(this.labelled(count > 1 ? `${label} ${i + 1}` : label, select));
    }
  }

  private labelled(text: string, control: HTMLElement): HTMLElement {
    const wrap = document.createElement('label');
    wrap.className = 'control';
    const span = document.createElement('span');
    span.textContent = text;
    wrap.append(span, control);
    return wrap;
  }
}
