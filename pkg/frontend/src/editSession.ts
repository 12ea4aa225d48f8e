/**
 * State machine for the span-editing task: fetch a paragraph, collect the
 * initial quality score, gather edits with undo, then submit the final
 * score and move on. Mutations are optimistic with rollback on rejection,
 * and at most one is in flight at a time.
 */

import { AnnotationApi, Paragraph } from './api.js';
import { WireCategory } from './categories.js';
import { SelectionOffsets, scalarSlice } from './offsets.js';

export type Phase = 'idle' | 'initial-score' | 'editing' | 'final-score' | 'done';

export interface LocalEdit {
  start: number;
  end: number;
  original: string;
  replacement: string;
  category: WireCategory;
  orderIndex: number;
  undone: boolean;
}

export class SessionError extends Error {}

export class EditSession {
  phase: Phase = 'idle';
  paragraph: Paragraph | null = null;
  edits: LocalEdit[] = [];
  initialScore: number | null = null;
  private busy = false;

  constructor(
    private readonly api: AnnotationApi,
    readonly annotator: string,
  ) {}

  private async exclusive<T>(action: () => Promise<T>): Promise<T> {
    if (this.busy) throw new SessionError('another change is still in flight');
    this.busy = true;
    try {
      return await action();
    } finally {
      this.busy = false;
    }
  }

  liveEdits(): LocalEdit[] {
    return this.edits.filter((e) => !e.undone);
  }

  /** The undo affordance is available iff at least one live edit exists. */
  canUndo(): boolean {
    return this.liveEdits().length > 0;
  }

  async start(): Promise<Phase> {
    return this.exclusive(async () => {
      const paragraph = await this.api.nextTask(this.annotator);
      this.paragraph = paragraph;
      this.edits = [];
      this.initialScore = null;
      this.phase = paragraph ? 'initial-score' : 'done';
      return this.phase;
    });
  }

  /** The initial score is requested before any edit can be made. */
  setInitialScore(iwqs: number): void {
    if (this.phase !== 'initial-score') throw new SessionError('not awaiting an initial score');
    validateScore(iwqs);
    this.initialScore = iwqs;
    this.phase = 'editing';
  }

  async addEdit(
    offsets: SelectionOffsets,
    category: WireCategory,
    replacement: string,
  ): Promise<LocalEdit> {
    if (this.phase !== 'editing') throw new SessionError('scoring is not finished');
    const paragraph = this.paragraph;
    if (!paragraph) throw new SessionError('no paragraph loaded');
    const original = scalarSlice(paragraph.response, offsets.start, offsets.end);
    const edit: LocalEdit = {
      start: offsets.start,
      end: offsets.end,
      original,
      replacement,
      category,
      orderIndex: this.edits.length,
      undone: false,
    };
    this.edits.push(edit); // optimistic
    return this.exclusive(async () => {
      try {
        await this.api.submitEdit({
          session: this.annotator,
          paragraph_id: paragraph.id,
          start: edit.start,
          end: edit.end,
          original: edit.original,
          replacement: edit.replacement,
          category: edit.category,
        });
        return edit;
      } catch (err) {
        this.edits.pop(); // rollback
        throw err;
      }
    });
  }

  async undo(): Promise<void> {
    if (!this.canUndo()) throw new SessionError('nothing to undo');
    const paragraph = this.paragraph;
    if (!paragraph) throw new SessionError('no paragraph loaded');
    const live = this.liveEdits();
    const last = live[live.length - 1]!;
    last.undone = true; // optimistic
    await this.exclusive(async () => {
      try {
        await this.api.undo(this.annotator, paragraph.id);
      } catch (err) {
        last.undone = false;
        throw err;
      }
    });
  }

  beginFinalScore(): void {
    if (this.phase !== 'editing') throw new SessionError('not editing');
    this.phase = 'final-score';
  }

  /** Submit both scores; the final score closes the paragraph. */
  async finish(fwqs: number): Promise<void> {
    if (this.phase !== 'final-score') throw new SessionError('not awaiting a final score');
    validateScore(fwqs);
    const paragraph = this.paragraph;
    const iwqs = this.initialScore;
    if (!paragraph || iwqs === null) throw new SessionError('session incomplete');
    await this.exclusive(async () => {
      await this.api.submitScores(this.annotator, paragraph.id, iwqs, fwqs);
    });
    this.phase = 'idle';
  }
}

function validateScore(score: number): void {
  if (!Number.isInteger(score) || score < 1 || score > 10) {
    throw new SessionError('scores are integers from 1 to 10');
  }
}
