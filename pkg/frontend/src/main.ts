/**
 * DOM wiring for the two tasks. All protocol logic lives in the session and
 * ranking modules; this file only renders state and translates browser
 * events (text selection, clicks) into module calls.
 */

import { AnnotationApi, ApiError, TripletView } from './api.js';
import { CATEGORY_LABELS, CATEGORY_NAMES, CategoryName, wireCategory } from './categories.js';
import { EditSession, LocalEdit } from './editSession.js';
import { selectionToOffsets, SelectionError } from './offsets.js';
import { RankingControl, Rank } from './ranking.js';

const api = new AnnotationApi('');

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  attrs: Record<string, string> = {},
  ...children: (Node | string)[]
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  for (const [key, value] of Object.entries(attrs)) node.setAttribute(key, value);
  node.append(...children);
  return node;
}

const root = document.getElementById('app')!;

function show(view: HTMLElement): void {
  root.replaceChildren(view);
}

function flash(message: string): void {
  const banner = document.getElementById('banner')!;
  banner.textContent = message;
  banner.classList.add('visible');
  setTimeout(() => banner.classList.remove('visible'), 4000);
}

// ---------------------------------------------------------------------------
// landing
// ---------------------------------------------------------------------------

function landing(): HTMLElement {
  const annotatorInput = el('input', { placeholder: 'annotator id', value: '' });
  const judgeInput = el('input', { placeholder: 'judge id', value: '' });
  const editButton = el('button', {}, 'Start editing');
  const rankButton = el('button', {}, 'Start ranking');
  editButton.addEventListener('click', () => {
    if (annotatorInput.value.trim()) startEditing(annotatorInput.value.trim());
  });
  rankButton.addEventListener('click', () => {
    if (judgeInput.value.trim()) startRanking(judgeInput.value.trim());
  });
  return el(
    'section',
    { class: 'landing' },
    el('h1', {}, 'Writing annotation'),
    el('div', { class: 'row' }, annotatorInput, editButton),
    el('div', { class: 'row' }, judgeInput, rankButton),
  );
}

// ---------------------------------------------------------------------------
// edit task
// ---------------------------------------------------------------------------

async function startEditing(annotator: string): Promise<void> {
  const session = new EditSession(api, annotator);
  await advance(session);
}

async function advance(session: EditSession): Promise<void> {
  try {
    const phase = await session.start();
    if (phase === 'done') {
      show(el('section', {}, el('h2', {}, 'No paragraphs left. Thank you!')));
      return;
    }
    show(scoreView(session, 'initial'));
  } catch (err) {
    flash(String(err));
  }
}

function scoreView(session: EditSession, which: 'initial' | 'final'): HTMLElement {
  const title =
    which === 'initial'
      ? 'Before editing: rate the writing quality (1-10)'
      : 'After editing: rate the final quality (1-10)';
  const picker = el('div', { class: 'scores' });
  for (let score = 1; score <= 10; score++) {
    const button = el('button', { class: 'score' }, String(score));
    button.addEventListener('click', async () => {
      try {
        if (which === 'initial') {
          session.setInitialScore(score);
          show(editView(session));
        } else {
          await session.finish(score);
          await advance(session);
        }
      } catch (err) {
        flash(String(err));
      }
    });
    picker.append(button);
  }
  const paragraph = session.paragraph!;
  return el(
    'section',
    {},
    el('h2', {}, title),
    el('p', { class: 'instruction' }, paragraph.instruction),
    el('div', { class: 'paragraph' }, paragraph.response),
    picker,
  );
}

/** Render the paragraph with struck-through edits and inline replacements.
 * Replacement text is marked data-skip so selection offsets keep mapping
 * onto the original response. */
function renderParagraph(text: string, edits: LocalEdit[]): HTMLElement {
  const container = el('div', { class: 'paragraph', id: 'paragraph' });
  const live = edits.filter((e) => !e.undone).sort((a, b) => a.start - b.start);
  const chars = Array.from(text); // scalar values
  let cursor = 0;
  for (const edit of live) {
    if (edit.start > cursor) {
      container.append(chars.slice(cursor, edit.start).join(''));
    }
    container.append(el('del', {}, chars.slice(edit.start, edit.end).join('')));
    if (edit.replacement) {
      const ins = el('ins', { 'data-skip': '1' }, edit.replacement);
      container.append(ins);
    }
    cursor = edit.end;
  }
  container.append(chars.slice(cursor).join(''));
  return container;
}

/** Absolute code-unit offset of (node, nodeOffset) within the paragraph,
 * counting only selectable (non data-skip) text. */
function absoluteUnitOffset(paragraphNode: HTMLElement, node: Node, nodeOffset: number): number {
  let units = 0;
  const walker = document.createTreeWalker(paragraphNode, NodeFilter.SHOW_TEXT, {
    acceptNode(candidate) {
      const parent = candidate.parentElement;
      return parent && parent.closest('[data-skip]')
        ? NodeFilter.FILTER_REJECT
        : NodeFilter.FILTER_ACCEPT;
    },
  });
  let current = walker.nextNode();
  while (current) {
    if (current === node) return units + nodeOffset;
    units += (current.textContent ?? '').length;
    current = walker.nextNode();
  }
  throw new SelectionError('selection lies outside the paragraph');
}

function editView(session: EditSession): HTMLElement {
  const paragraph = session.paragraph!;
  const container = el('section', {});
  const paragraphNode = renderParagraph(paragraph.response, session.edits);

  const undoButton = el('button', { id: 'undo' }, 'Undo last edit');
  const finishButton = el('button', {}, 'Finish & score');
  const editLog = el('ol', { class: 'edit-log' });

  const refresh = () => {
    paragraphNode.replaceWith(...[renderParagraph(paragraph.response, session.edits)]);
    undoButton.toggleAttribute('disabled', !session.canUndo());
    editLog.replaceChildren(
      ...session.edits.map((e) =>
        el(
          'li',
          { class: e.undone ? 'undone' : '' },
          `[${e.start},${e.end}) ${labelOf(e)}: "${e.original}" -> "${e.replacement}"`,
        ),
      ),
    );
  };

  undoButton.addEventListener('click', async () => {
    try {
      await session.undo();
    } catch (err) {
      flash(String(err));
    }
    rebuild();
  });
  finishButton.addEventListener('click', () => {
    session.beginFinalScore();
    show(scoreView(session, 'final'));
  });

  const popup = el('div', { class: 'popup hidden', id: 'popup' });

  document.addEventListener('mouseup', () => {
    const selection = window.getSelection();
    if (!selection || selection.isCollapsed || session.phase !== 'editing') return;
    const range = selection.getRangeAt(0);
    const node = document.getElementById('paragraph');
    if (!node || !node.contains(range.commonAncestorContainer)) return;
    try {
      const unitStart = absoluteUnitOffset(node, range.startContainer, range.startOffset);
      const unitEnd = absoluteUnitOffset(node, range.endContainer, range.endOffset);
      const offsets = selectionToOffsets(paragraph.response, unitStart, unitEnd);
      openPopup(offsets.start, offsets.end, selection.toString());
    } catch (err) {
      if (err instanceof SelectionError) flash(err.message);
    }
  });

  function openPopup(start: number, end: number, selected: string): void {
    const select = el('select', { id: 'category' });
    for (const name of CATEGORY_NAMES) {
      select.append(el('option', { value: name }, CATEGORY_LABELS[name]));
    }
    select.append(el('option', { value: 'Other' }, 'Other…'));
    const otherName = el('input', { placeholder: 'name the category', class: 'hidden' });
    select.addEventListener('change', () => {
      otherName.classList.toggle('hidden', select.value !== 'Other');
    });
    const rewrite = el('textarea', { placeholder: 'rewrite (leave empty to delete)' });
    const submit = el('button', {}, 'Save edit');
    const cancel = el('button', {}, 'Cancel');
    submit.addEventListener('click', async () => {
      try {
        const category = wireCategory(select.value as CategoryName | 'Other', otherName.value);
        await session.addEdit({ start, end }, category, rewrite.value);
        popup.classList.add('hidden');
        rebuild();
      } catch (err) {
        if (err instanceof ApiError) flash(`rejected: ${err.message}`);
        else flash(String(err));
      }
    });
    cancel.addEventListener('click', () => popup.classList.add('hidden'));
    popup.replaceChildren(
      el('p', {}, `Selected: "${selected}"`),
      select,
      otherName,
      rewrite,
      el('div', { class: 'row' }, submit, cancel),
    );
    popup.classList.remove('hidden');
  }

  function rebuild(): void {
    show(editView(session));
  }

  container.append(
    el('h2', {}, 'Select any span to suggest a rewrite'),
    el('p', { class: 'instruction' }, paragraph.instruction),
    paragraphNode,
    popup,
    el('div', { class: 'row' }, undoButton, finishButton),
    editLog,
  );
  refresh();
  return container;
}

function labelOf(edit: LocalEdit): string {
  return typeof edit.category === 'string'
    ? CATEGORY_LABELS[edit.category]
    : `Other (${edit.category.other})`;
}

// ---------------------------------------------------------------------------
// ranking task
// ---------------------------------------------------------------------------

async function startRanking(judge: string): Promise<void> {
  try {
    const triplet = await api.nextTriplet(judge);
    if (!triplet) {
      show(el('section', {}, el('h2', {}, 'No triplets left. Thank you!')));
      return;
    }
    show(rankingView(judge, triplet));
  } catch (err) {
    flash(String(err));
  }
}

function rankingView(judge: string, triplet: TripletView): HTMLElement {
  const control = new RankingControl();
  const submit = el('button', { disabled: '' }, 'Submit ranking');
  const letters = ['A', 'B', 'C'] as const;

  const cards = triplet.variants.map((text, slot) => {
    const buttons = el('div', { class: 'row' });
    for (const rank of [1, 2, 3] as Rank[]) {
      const button = el('button', { class: 'rank', 'data-slot': String(slot), 'data-rank': String(rank) }, String(rank));
      button.addEventListener('click', () => {
        control.assign(slot, rank);
        repaint();
      });
      buttons.append(button);
    }
    return el(
      'article',
      { class: 'variant' },
      el('h3', {}, `Paragraph ${letters[slot]}`),
      el('p', {}, text),
      buttons,
    );
  });

  function repaint(): void {
    for (const button of root.querySelectorAll<HTMLButtonElement>('button.rank')) {
      const slot = Number(button.dataset.slot);
      const rank = Number(button.dataset.rank) as Rank;
      button.classList.toggle('selected', control.rankOf(slot) === rank);
    }
    submit.toggleAttribute('disabled', !control.canSubmit());
  }

  submit.addEventListener('click', async () => {
    try {
      await api.submitRanking(judge, triplet.triplet_id, control.ranks());
      await startRanking(judge); // fetch the next triplet automatically
    } catch (err) {
      flash(String(err));
    }
  });

  return el(
    'section',
    {},
    el('h2', {}, 'Rank the three paragraphs by preference (1 = best)'),
    ...cards,
    submit,
  );
}

show(landing());
