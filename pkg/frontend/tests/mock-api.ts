/** Fixture-backed API double: deterministic data, no network. */

import {
  Catalog,
  CurveDoc,
  Matrix,
  MetricsSummary,
  ProjectionDoc,
  TraceApi,
  TraceMeta,
  TraceEntry,
} from '../src/api';

const STEPS = Array.from({ length: 20 }, (_, i) => 19 - i);
const FRAMES = 30;
const MELS = 16;

function traceEntry(source: number, song: number, target: number): TraceEntry {
  return {
    job: {
      source_singer: source,
      song,
      target_singer: target,
      num_steps: 20,
      seed: 0,
    },
    steps: [...STEPS],
    frames: FRAMES,
    n_mels: MELS,
    content_hash: `hash-${source}-${song}-${target}`,
  };
}

export class MockApi implements TraceApi {
  calls: string[] = [];
  traces: Record<string, TraceEntry> = {
    't-0-0-1': traceEntry(0, 0, 1),
  };

  async catalog(): Promise<Catalog> {
    this.calls.push('catalog');
    return {
      display_modes: [
        'StepComparison',
        'SourceSingerComparison',
        'SongComparison',
        'TargetSingerComparison',
        'MetricComparison',
      ],
      singers: [0, 1, 2, 3].map((i) => ({ singer_id: i, base_f0_multiplier: 1 })),
      songs: [0, 1, 2, 3].map((i) => ({ song_id: i, notes: [[60, 500]] })),
      traces: { ...this.traces },
      checkpoints: ['checkpoints/final.ckpt'],
    };
  }

  async traceMeta(traceId: string): Promise<TraceMeta> {
    return {
      trace_id: traceId,
      steps: [...STEPS],
      frames: FRAMES,
      n_mels: MELS,
      mel_norm: { lo: -20, hi: 5 },
      sample_rate: 16000,
    };
  }

  async mel(traceId: string, step: number): Promise<Matrix> {
    this.calls.push(`mel:${traceId}:${step}`);
    if (!STEPS.includes(step)) throw new Error('unknown step');
    const values = new Float32Array(FRAMES * MELS);
    for (let i = 0; i < values.length; i++) values[i] = (step + i) % 7;
    return { dims: [FRAMES, MELS], values };
  }

  async f0(traceId: string, step: number): Promise<Matrix> {
    const values = new Float32Array(FRAMES);
    for (let i = 0; i < FRAMES; i++) values[i] = i % 3 === 0 ? 0 : 220 + step + i;
    return { dims: [FRAMES], values };
  }

  audioUrl(traceId: string, step: number): string {
    return `/trace/${traceId}/audio?step=${step}`;
  }

  async melDiff(
    a: { traceId: string; step: number },
    b: { traceId: string; step: number },
  ): Promise<Matrix> {
    this.calls.push(`meldiff:${a.traceId}:${a.step}|${b.traceId}:${b.step}`);
    const values = new Float32Array(FRAMES * MELS).fill(Math.abs(a.step - b.step));
    return { dims: [FRAMES, MELS], values };
  }

  async traceMetrics(traceId: string): Promise<Record<string, CurveDoc>> {
    this.calls.push(`metrics:${traceId}`);
    const mk = (base: number): CurveDoc => ({
      steps: [...STEPS],
      values: STEPS.map((s) => (s === 17 ? null : base + s * 0.1)),
    });
    return {
      Dembed: mk(0.2),
      F0CORR: mk(0.1),
      FAD: mk(3.0),
      F0RMSE: mk(20),
      MCD: mk(5),
    };
  }

  async projection(traceId: string, embedding: string, layer: string | null): Promise<ProjectionDoc> {
    this.calls.push(`projection:${traceId}:${embedding}:${layer ?? ''}`);
    return {
      points: STEPS.map((s, i) => [Math.cos(i / 3) * (i + 1), Math.sin(i / 3) * (i + 1)]),
      steps: [...STEPS],
      kl_history: [1.0, 0.4],
    };
  }

  async metricsSummary(): Promise<MetricsSummary> {
    this.calls.push('summary');
    return {
      pool_size: 2,
      means: { Dembed: 0.95, F0CORR: 0.9, FAD: 12.0, F0RMSE: 30.0, MCD: 6.0 },
      display: { Dembed: 0.95, F0CORR: 0.9, FAD: 1.08, F0RMSE: 1.48, MCD: 0.78 },
      polarity: {
        Dembed: 'higher_better',
        F0CORR: 'higher_better',
        FAD: 'lower_better',
        F0RMSE: 'lower_better',
        MCD: 'lower_better',
      },
      per_trace: { 't-0-0-1': { MCD: 6.0 } },
      best: { Dembed: 't-0-0-1', F0CORR: 't-0-0-1', FAD: 't-0-0-1', F0RMSE: 't-0-0-1', MCD: 't-0-0-1' },
    };
  }

  async bestSample(kind: string): Promise<string> {
    this.calls.push(`best:${kind}`);
    return 't-0-0-1';
  }

  async convert(job: {
    source_singer: number;
    song: number;
    target_singer: number;
  }): Promise<string> {
    const id = `t-${job.source_singer}-${job.song}-${job.target_singer}`;
    this.calls.push(`convert:${id}`);
    this.traces[id] = traceEntry(job.source_singer, job.song, job.target_singer);
    return id;
  }
}

export function flush(): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, 0));
}

export async function settle(rounds = 6): Promise<void> {
  for (let i = 0; i < rounds; i++) await flush();
}
