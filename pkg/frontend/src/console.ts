// Command console logic: free-text grammar input plus form builders for the
// five operations. Grammar errors surface with the server's reported
// position so the offending token can be highlighted.

import { ApiError, type ApiClient } from './api';
import type { SessionStore } from './state';
import type { CommandResponse } from './types';

export interface CommandOutcome {
  ok: boolean;
  text: string;
  response?: CommandResponse;
  error?: { message: string; position?: number; kind: string };
}

export interface MoveForm {
  instanceId: string;
  dx: number;
  dy: number;
  dz?: number;
  rotate?: number;
  scale?: number;
}

export interface AddForm {
  assetRef: string;
  x: number;
  y: number;
  yaw?: number;
  scale?: number;
}

export interface EditForm {
  instanceId: string;
  key: 'height' | 'tint' | 'material' | 'asset_ref';
  value: string | number;
}

export interface ReplaceForm {
  target: string; // layer kind or instance id
  surface?: string;
  materialId: string;
}

const num = (v: number) => (Number.isInteger(v) ? String(v) : v.toFixed(4));

export function buildAdd(form: AddForm): string {
  let text = `add ${form.assetRef} at (${num(form.x)},${num(form.y)})`;
  if (form.yaw !== undefined && form.yaw !== 0) text += ` yaw ${num(form.yaw)}`;
  if (form.scale !== undefined && form.scale !== 1) text += ` scale ${num(form.scale)}`;
  return text;
}

export function buildDelete(instanceId: string): string {
  return `delete ${instanceId}`;
}

export function buildEdit(form: EditForm): string {
  return `edit ${form.instanceId} set ${form.key}=${form.value}`;
}

export function buildMove(form: MoveForm): string {
  const delta =
    form.dz !== undefined && form.dz !== 0
      ? `(${num(form.dx)},${num(form.dy)},${num(form.dz)})`
      : `(${num(form.dx)},${num(form.dy)})`;
  let text = `move ${form.instanceId} by ${delta}`;
  if (form.rotate !== undefined && form.rotate !== 0) text += ` rotate ${num(form.rotate)}`;
  if (form.scale !== undefined && form.scale !== 1) text += ` scale ${num(form.scale)}`;
  return text;
}

export function buildReplace(form: ReplaceForm): string {
  const target = form.surface ? `${form.target}.${form.surface}` : form.target;
  return `replace ${target} with ${form.materialId}`;
}

export class CommandConsole {
  history: CommandOutcome[] = [];

  constructor(private api: ApiClient, private store: SessionStore) {}

  // POST the command, then re-fetch the authoritative document.
  async submit(text: string): Promise<CommandOutcome> {
    const sessionId = this.store.current.sessionId;
    let outcome: CommandOutcome;
    try {
      const response = await this.api.sendCommand(sessionId, text);
      await this.store.refresh();
      outcome = { ok: true, text, response };
    } catch (error) {
      if (error instanceof ApiError) {
        outcome = {
          ok: false,
          text,
          error: {
            kind: error.payload?.error ?? 'Error',
            message: error.message,
            position: error.payload?.position,
          },
        };
      } else {
        throw error;
      }
    }
    this.history.push(outcome);
    return outcome;
  }

  async undo(): Promise<CommandOutcome> {
    return this.historyCall(() => this.api.undo(this.store.current.sessionId), 'undo');
  }

  async redo(): Promise<CommandOutcome> {
    return this.historyCall(() => this.api.redo(this.store.current.sessionId), 'redo');
  }

  private async historyCall(
    call: () => Promise<CommandResponse>,
    label: string
  ): Promise<CommandOutcome> {
    try {
      const response = await call();
      await this.store.refresh();
      const outcome: CommandOutcome = { ok: true, text: label, response };
      this.history.push(outcome);
      return outcome;
    } catch (error) {
      if (error instanceof ApiError) {
        const outcome: CommandOutcome = {
          ok: false,
          text: label,
          error: { kind: error.payload?.error ?? 'Error', message: error.message },
        };
        this.history.push(outcome);
        return outcome;
      }
      throw error;
    }
  }
}

// Annotated spans for rendering a rejected command with the bad token marked.
export function highlightError(text: string, position?: number): { before: string; bad: string; after: string } {
  if (position === undefined || position < 0 || position > text.length) {
    return { before: text, bad: '', after: '' };
  }
  const rest = text.slice(position);
  const match = rest.match(/^\S+/);
  const bad = match ? match[0] : rest;
  return {
    before: text.slice(0, position),
    bad,
    after: text.slice(position + bad.length),
  };
}
