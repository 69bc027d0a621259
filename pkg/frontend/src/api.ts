/**
 * Client for the trace-service HTTP API.
 *
 * Matrix payloads arrive as a dims + base64 float32 envelope; decoding
 * yields exactly the stored bytes, so the client never recomputes any
 * metric or projection (single source of truth on the server).
 */

export interface MatrixEnvelope {
  dims: number[];
  dtype: string;
  data: string; // base64 little-endian float32, row-major
}

export interface Matrix {
  dims: number[];
  values: Float32Array;
}

export interface SingerInfo {
  singer_id: number;
  base_f0_multiplier: number;
  [key: string]: unknown;
}

export interface SongInfo {
  song_id: number;
  notes: [number, number][];
}

export interface TraceEntry {
  job: {
    source_singer: number;
    song: number;
    target_singer: number;
    num_steps: number;
    seed: number;
  };
  steps: number[];
  frames: number;
  n_mels: number;
  content_hash: string;
}

export interface Catalog {
  display_modes: string[];
  singers: SingerInfo[];
  songs: SongInfo[];
  traces: Record<string, TraceEntry>;
  checkpoints: string[];
}

export interface TraceMeta {
  trace_id: string;
  steps: number[];
  frames: number;
  n_mels: number;
  mel_norm: { lo: number; hi: number };
  sample_rate: number;
}

export interface ProjectionDoc {
  points: [number, number][];
  steps: number[];
  kl_history: number[];
}

export interface CurveDoc {
  steps: number[];
  values: (number | null)[];
}

export interface MetricsSummary {
  pool_size: number;
  means: Record<string, number | null>;
  display: Record<string, number | null>;
  polarity: Record<string, string>;
  per_trace: Record<string, Record<string, number | null>>;
  best: Record<string, string | null>;
}

export function decodeMatrix(doc: MatrixEnvelope): Matrix {
  const raw = atob(doc.data);
  const bytes = new Uint8Array(raw.length);
  for (let i = 0; i < raw.length; i++) bytes[i] = raw.charCodeAt(i);
  return { dims: doc.dims, values: new Float32Array(bytes.buffer) };
}

/** Interface every view talks to; tests substitute a fixture-backed mock. */
export interface TraceApi {
  catalog(): Promise<Catalog>;
  traceMeta(traceId: string): Promise<TraceMeta>;
  mel(traceId: string, step: number, kind?: 'yt' | 'x0'): Promise<Matrix>;
  f0(traceId: string, step: number): Promise<Matrix>;
  audioUrl(traceId: string, step: number): string;
  melDiff(a: { traceId: string; step: number }, b: { traceId: string; step: number }): Promise<Matrix>;
  traceMetrics(traceId: string): Promise<Record<string, CurveDoc>>;
  projection(traceId: string, embedding: string, layer: string | null): Promise<ProjectionDoc>;
  metricsSummary(): Promise<MetricsSummary>;
  bestSample(kind: string): Promise<string>;
  convert(job: {
    source_singer: number;
    song: number;
    target_singer: number;
    num_steps?: number;
    seed?: number;
  }): Promise<string>;
}

export class HttpTraceApi implements TraceApi {
  constructor(private base: string = '') {}

  private async getJson<T>(path: string): Promise<T> {
    const response = await fetch(this.base + path);
    if (!response.ok) throw new Error(`${path} failed: ${response.status}`);
    return (await response.json()) as T;
  }

  catalog() {
    return this.getJson<Catalog>('/catalog');
  }

  traceMeta(traceId: string) {
    return this.getJson<TraceMeta>(`/trace/${traceId}/meta`);
  }

  async mel(traceId: string, step: number, kind: 'yt' | 'x0' = 'yt') {
    const doc = await this.getJson<MatrixEnvelope>(
      `/trace/${traceId}/mel?step=${step}&kind=${kind}`,
    );
    return decodeMatrix(doc);
  }

  async f0(traceId: string, step: number) {
    return decodeMatrix(
      await this.getJson<MatrixEnvelope>(`/trace/${traceId}/f0?step=${step}`),
    );
  }

  audioUrl(traceId: string, step: number) {
    return `${this.base}/trace/${traceId}/audio?step=${step}`;
  }

  async melDiff(a: { traceId: string; step: number }, b: { traceId: string; step: number }) {
    const doc = await this.getJson<MatrixEnvelope>(
      `/meldiff?a=${a.traceId}:${a.step}&b=${b.traceId}:${b.step}`,
    );
    return decodeMatrix(doc);
  }

  traceMetrics(traceId: string) {
    return this.getJson<Record<string, CurveDoc>>(`/trace/${traceId}/metrics`);
  }

  projection(traceId: string, embedding: string, layer: string | null) {
    const layerPart = layer ? `&layer=${layer}` : '';
    return this.getJson<ProjectionDoc>(
      `/trace/${traceId}/projection?embedding=${embedding}${layerPart}`,
    );
  }

  metricsSummary() {
    return this.getJson<MetricsSummary>('/metrics/summary');
  }

  async bestSample(kind: string) {
    const doc = await this.getJson<{ trace_id: string }>(`/metrics/best?kind=${kind}`);
    return doc.trace_id;
  }

  async convert(job: {
    source_singer: number;
    song: number;
    target_singer: number;
    num_steps?: number;
    seed?: number;
  }) {
    const response = await fetch(`${this.base}/convert`, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify(job),
    });
    if (!response.ok) throw new Error(`convert failed: ${response.status}`);
    const doc = (await response.json()) as { trace_id: string };
    return doc.trace_id;
  }
}
