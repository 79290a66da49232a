// DOM construction for the console and judging panels. Kept renderer-free so
// the same code runs in the browser and under jsdom in tests.

import { highlightError, type CommandOutcome } from './console';
import type { JudgingTask, RevealedVerdict } from './judging';
import type { ViewState } from './state';

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function renderConsolePanel(
  doc: Document,
  state: ViewState,
  history: CommandOutcome[]
): HTMLElement {
  const panel = el(doc, 'section', 'console-panel');

  const input = el(doc, 'input', 'command-input');
  input.id = 'command-input';
  input.setAttribute('placeholder', 'add | delete | edit | move | replace ...');
  input.value = state.pendingCommand;
  panel.appendChild(input);

  const buttons = el(doc, 'div', 'command-buttons');
  for (const [id, label, enabled] of [
    ['submit-command', 'Run', true],
    ['undo-button', 'Undo', state.canUndo],
    ['redo-button', 'Redo', state.canRedo],
  ] as const) {
    const button = el(doc, 'button', undefined, label);
    button.id = id;
    if (!enabled) button.setAttribute('disabled', 'disabled');
    buttons.appendChild(button);
  }
  panel.appendChild(buttons);

  const log = el(doc, 'ul', 'command-log');
  for (const outcome of history.slice(-8)) {
    const item = el(doc, 'li', outcome.ok ? 'ok' : 'error');
    if (outcome.ok) {
      item.textContent = `${outcome.text} -> r${outcome.response?.revision}`;
    } else if (outcome.error?.position !== undefined) {
      const spans = highlightError(outcome.text, outcome.error.position);
      item.appendChild(el(doc, 'span', undefined, spans.before));
      item.appendChild(el(doc, 'mark', 'bad-token', spans.bad));
      item.appendChild(el(doc, 'span', undefined, spans.after));
      item.appendChild(el(doc, 'span', 'error-message', ` ${outcome.error.message}`));
    } else {
      item.textContent = `${outcome.text}: ${outcome.error?.message}`;
    }
    log.appendChild(item);
  }
  panel.appendChild(log);

  const selection = el(doc, 'div', 'selection-info');
  const selected = state.selectedInstanceId
    ? state.doc?.instances.find((inst) => inst.id === state.selectedInstanceId)
    : undefined;
  if (selected) {
    const t = selected.placement.translation;
    selection.textContent =
      `selected: ${selected.id} [${selected.category}] at ` +
      `(${t[0].toFixed(1)}, ${t[1].toFixed(1)}, ${t[2].toFixed(1)}) ` +
      `yaw ${selected.placement.yaw.toFixed(3)} ` +
      `scale ${selected.placement.xy_scale.toFixed(2)}/${selected.placement.z_scale.toFixed(2)}`;
  } else {
    selection.textContent = 'nothing selected';
  }
  panel.appendChild(selection);
  return panel;
}

export function renderJudgingPanel(doc: Document, task: JudgingTask | null): HTMLElement {
  const panel = el(doc, 'section', 'judging-panel');
  if (task === null) {
    panel.appendChild(el(doc, 'p', 'queue-complete', 'Judging queue complete.'));
    return panel;
  }
  panel.appendChild(el(doc, 'h3', undefined, `${task.dimension}`));
  panel.appendChild(el(doc, 'p', 'rubric', task.rubric));
  panel.appendChild(
    el(doc, 'p', 'progress', `pair ${task.position} of ${task.total}`)
  );

  // method-blind: the two sides carry only neutral labels and image refs
  const row = el(doc, 'div', 'pair-row');
  for (const [side, image] of [
    ['A', task.imageA],
    ['B', task.imageB],
  ] as const) {
    const card = el(doc, 'figure', 'candidate');
    card.setAttribute('data-side', side);
    const img = el(doc, 'img');
    img.setAttribute('src', image);
    img.setAttribute('alt', `candidate ${side}`);
    card.appendChild(img);
    card.appendChild(el(doc, 'figcaption', undefined, `Candidate ${side}`));
    const pick = el(doc, 'button', 'pick', `${side} is better`);
    pick.id = `pick-${side.toLowerCase()}`;
    card.appendChild(pick);
    row.appendChild(card);
  }
  panel.appendChild(row);
  return panel;
}

export function renderVerdictToast(doc: Document, verdict: RevealedVerdict): HTMLElement {
  // shown only after the POST succeeded; identities are allowed here
  const toast = el(
    doc,
    'div',
    'verdict-toast',
    `recorded: ${verdict.winner === 'A' ? verdict.methodA : verdict.methodB} wins slot ${verdict.index}`
  );
  return toast;
}

export function renderLoadErrorBanner(doc: Document, message: string, onRetryId = 'retry-load'): HTMLElement {
  const banner = el(doc, 'div', 'error-banner');
  banner.appendChild(el(doc, 'span', undefined, `scene failed to load: ${message}`));
  const retry = el(doc, 'button', undefined, 'Retry');
  retry.id = onRetryId;
  banner.appendChild(retry);
  return banner;
}
