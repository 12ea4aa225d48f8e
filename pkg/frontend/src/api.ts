/** Typed client for the annotation service HTTP API. */

import type { WireCategory } from './categories.js';

export interface Paragraph {
  id: string;
  genre: string;
  venue: string;
  instruction: string;
  response: string;
}

export interface EditBody {
  session: string;
  paragraph_id: string;
  start: number;
  end: number;
  original: string;
  replacement: string;
  category: WireCategory;
}

export interface TripletView {
  triplet_id: string;
  variants: [string, string, string];
}

export class ApiError extends Error {
  constructor(readonly status: number, detail: string) {
    super(detail);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

export class AnnotationApi {
  constructor(
    private readonly base: string = '',
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.base + path, init);
    const body = await resp.json().catch(() => ({}));
    if (!resp.ok) {
      const detail = typeof body?.detail === 'string' ? body.detail : resp.statusText;
      throw new ApiError(resp.status, detail);
    }
    return body as T;
  }

  private post<T>(path: string, payload: unknown): Promise<T> {
    return this.request<T>(path, {
      method: 'POST',
      headers: { 'Content-Type': 'application/json' },
      body: JSON.stringify(payload),
    });
  }

  async nextTask(annotator: string): Promise<Paragraph | null> {
    const body = await this.request<{ paragraph: Paragraph | null }>(
      `/api/tasks/next?annotator=${encodeURIComponent(annotator)}`,
    );
    return body.paragraph;
  }

  async submitEdit(edit: EditBody): Promise<number> {
    const body = await this.post<{ seq: number }>('/api/edits', edit);
    return body.seq;
  }

  async undo(session: string, paragraphId: string): Promise<number> {
    const body = await this.post<{ seq: number }>('/api/edits/undo', {
      session,
      paragraph_id: paragraphId,
    });
    return body.seq;
  }

  async submitScores(
    session: string,
    paragraphId: string,
    iwqs: number,
    fwqs: number,
  ): Promise<void> {
    await this.post('/api/scores', { session, paragraph_id: paragraphId, iwqs, fwqs });
  }

  async nextTriplet(judge: string): Promise<TripletView | null> {
    const body = await this.request<{ triplet: TripletView | null }>(
      `/api/preference/next?judge=${encodeURIComponent(judge)}`,
    );
    return body.triplet;
  }

  async submitRanking(judge: string, tripletId: string, ranks: [number, number, number]): Promise<void> {
    await this.post('/api/preference/rank', { judge, triplet_id: tripletId, ranks });
  }

  async exportScope(scope: 'edits' | 'rankings'): Promise<string> {
    const resp = await this.fetchFn(`${this.base}/api/export?scope=${scope}`);
    if (!resp.ok) throw new ApiError(resp.status, resp.statusText);
    return resp.text();
  }
}
