import { describe, expect, it } from 'vitest';

import {
  DISPLAY_MODES,
  StateStore,
  defaultComparisonSteps,
  selectionShape,
} from '../src/state';

describe('display modes', () => {
  it('has exactly the five modes', () => {
    expect(DISPLAY_MODES.length).toBe(5);
    expect(DISPLAY_MODES).toContain('StepComparison');
    expect(DISPLAY_MODES).toContain('MetricComparison');
  });

  it('target comparison takes one source, one song, two targets', () => {
    expect(selectionShape('TargetSingerComparison')).toEqual([1, 1, 2]);
  });

  it('source comparison takes two sources', () => {
    expect(selectionShape('SourceSingerComparison')).toEqual([2, 1, 1]);
  });

  it('song comparison takes two songs', () => {
    expect(selectionShape('SongComparison')).toEqual([1, 2, 1]);
  });
});

describe('default comparison steps', () => {
  it('scales the full-size defaults down to the schedule length', () => {
    expect(defaultComparisonSteps(100)).toEqual([99, 10, 1]);
    expect(defaultComparisonSteps(1000)).toEqual([999, 100, 10]);
  });
});

describe('state store', () => {
  it('clamps the step to the slider range', () => {
    const store = new StateStore(99);
    store.setStep(500);
    expect(store.get().currentStep).toBe(99);
    store.setStep(-3);
    expect(store.get().currentStep).toBe(0);
  });

  it('resizes selections when the mode changes', () => {
    const store = new StateStore(99);
    store.setMode('TargetSingerComparison');
    const sel = store.get().selections;
    expect(sel.targetSingers.length).toBe(2);
    expect(sel.sourceSingers.length).toBe(1);
    store.setMode('StepComparison');
    expect(store.get().selections.targetSingers.length).toBe(1);
  });

  it('refuses the third simultaneous unit check', () => {
    const store = new StateStore(99);
    store.pinUnit({ traceId: 't', step: 9, caption: 'step 9' });
    store.pinUnit({ traceId: 't', step: 5, caption: 'step 5' });
    store.pinUnit({ traceId: 't', step: 1, caption: 'step 1' });
    expect(store.toggleUnitCheck(0)).toBe(true);
    expect(store.toggleUnitCheck(1)).toBe(true);
    expect(store.toggleUnitCheck(2)).toBe(false);
    expect(store.get().checkedUnits).toEqual([0, 1]);
    expect(store.diffPair?.map((u) => u.step)).toEqual([9, 5]);
    // unchecking frees a slot
    expect(store.toggleUnitCheck(0)).toBe(true);
    expect(store.toggleUnitCheck(2)).toBe(true);
  });

  it('diff pair exists only with exactly two checks', () => {
    const store = new StateStore(99);
    store.pinUnit({ traceId: 't', step: 9, caption: 'step 9' });
    store.pinUnit({ traceId: 't', step: 5, caption: 'step 5' });
    expect(store.diffPair).toBeNull();
    store.toggleUnitCheck(0);
    expect(store.diffPair).toBeNull();
    store.toggleUnitCheck(1);
    expect(store.diffPair).not.toBeNull();
  });

  it('reorders pinned units by drag and keeps checks attached', () => {
    const store = new StateStore(99);
    store.pinUnit({ traceId: 't', step: 9, caption: 'a' });
    store.pinUnit({ traceId: 't', step: 5, caption: 'b' });
    store.pinUnit({ traceId: 't', step: 1, caption: 'c' });
    store.toggleUnitCheck(0);
    store.movePinnedUnit(0, 2);
    expect(store.get().pinnedUnits.map((u) => u.caption)).toEqual(['b', 'c', 'a']);
    expect(store.get().checkedUnits).toEqual([2]); // the checked unit moved
  });

  it('mode switch clears checked units (no stale panels)', () => {
    const store = new StateStore(99);
    store.pinUnit({ traceId: 't', step: 9, caption: 'a' });
    store.toggleUnitCheck(0);
    store.setMode('SongComparison');
    expect(store.get().checkedUnits).toEqual([]);
  });
});
