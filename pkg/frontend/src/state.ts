// Session view state. The server document is authoritative: the store only
// ever holds what GET /scene returned, and the seen revision never goes
// backwards within a session view.

import type { ApiClient } from './api';
import type { AssetInstance, SceneDocumentJson } from './types';

export interface ViewState {
  sessionId: string;
  doc: SceneDocumentJson | null;
  selectedInstanceId: string | null;
  pendingCommand: string;
  lastRevisionSeen: number;
  canUndo: boolean;
  canRedo: boolean;
}

export type Listener = (state: ViewState) => void;

export class SessionStore {
  private state: ViewState;
  private listeners: Listener[] = [];

  constructor(private api: ApiClient, sessionId: string) {
    this.state = {
      sessionId,
      doc: null,
      selectedInstanceId: null,
      pendingCommand: '',
      lastRevisionSeen: 0,
      canUndo: false,
      canRedo: false,
    };
  }

  get current(): ViewState {
    return this.state;
  }

  subscribe(listener: Listener): () => void {
    this.listeners.push(listener);
    return () => {
      this.listeners = this.listeners.filter((l) => l !== listener);
    };
  }

  private emit() {
    for (const listener of this.listeners) listener(this.state);
  }

  private acceptRevision(revision: number): number {
    if (revision < this.state.lastRevisionSeen) {
      // stale response: keep the newer revision
      return this.state.lastRevisionSeen;
    }
    return revision;
  }

  async refresh(): Promise<SceneDocumentJson> {
    const doc = await this.api.getScene(this.state.sessionId);
    this.state = {
      ...this.state,
      doc,
      lastRevisionSeen: this.acceptRevision(doc.revision),
    };
    this.emit();
    return doc;
  }

  setHistoryFlags(canUndo: boolean, canRedo: boolean) {
    this.state = { ...this.state, canUndo, canRedo };
    this.emit();
  }

  select(instanceId: string | null) {
    this.state = { ...this.state, selectedInstanceId: instanceId };
    this.emit();
  }

  setPendingCommand(text: string) {
    this.state = { ...this.state, pendingCommand: text };
    this.emit();
  }

  instance(id: string): AssetInstance | undefined {
    return this.state.doc?.instances.find((inst) => inst.id === id);
  }
}
