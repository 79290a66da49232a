// Browser entry: wires the API client, session store, viewer, console, and
// judging panel into the page.

import { ApiClient, ApiError } from './api';
import { CommandConsole } from './console';
import { JudgingQueue } from './judging';
import {
  renderConsolePanel,
  renderJudgingPanel,
  renderLoadErrorBanner,
  renderVerdictToast,
} from './panels';
import { SessionStore } from './state';
import { SceneView } from './viewer';
import type { Dimension } from './types';

function param(name: string, fallback: string): string {
  return new URLSearchParams(window.location.search).get(name) ?? fallback;
}

async function boot() {
  const api = new ApiClient(param('api', window.location.origin));
  const sessionId = param('session', '');
  if (!sessionId) {
    document.body.textContent = 'missing ?session=<id>';
    return;
  }
  const store = new SessionStore(api, sessionId);
  const consolePanel = document.getElementById('console')!;
  const judgingPanel = document.getElementById('judging')!;
  const viewerPanel = document.getElementById('viewer')!;

  const view = new SceneView(api, store, viewerPanel);
  const commandConsole = new CommandConsole(api, store);

  const redrawConsole = () => {
    consolePanel.replaceChildren(
      renderConsolePanel(document, store.current, commandConsole.history)
    );
    const input = document.getElementById('command-input') as HTMLInputElement;
    input.addEventListener('change', () => store.setPendingCommand(input.value));
    document.getElementById('submit-command')!.addEventListener('click', async () => {
      await commandConsole.submit(input.value);
      redrawConsole();
      void view.reload();
    });
    document.getElementById('undo-button')!.addEventListener('click', async () => {
      await commandConsole.undo();
      redrawConsole();
      void view.reload();
    });
    document.getElementById('redo-button')!.addEventListener('click', async () => {
      await commandConsole.redo();
      redrawConsole();
      void view.reload();
    });
  };

  try {
    await store.refresh();
    await view.reload();
  } catch (error) {
    const message = error instanceof ApiError ? error.message : String(error);
    viewerPanel.replaceChildren(renderLoadErrorBanner(document, message));
    document.getElementById('retry-load')?.addEventListener('click', () => void boot());
  }
  redrawConsole();
  store.subscribe(() => redrawConsole());
  void view.watch();

  viewerPanel.addEventListener('click', (event) => {
    const rect = viewerPanel.getBoundingClientRect();
    const x = ((event.clientX - rect.left) / rect.width) * 2 - 1;
    const y = -(((event.clientY - rect.top) / rect.height) * 2 - 1);
    view.pickAt(x, y);
  });

  // judging panel (active when the server has an eval manifest)
  const dimension = param('dimension', 'SVC') as Dimension;
  const queue = new JudgingQueue(api, dimension, param('judge', 'anonymous'));
  try {
    await queue.load();
    const redrawJudging = () => {
      judgingPanel.replaceChildren(renderJudgingPanel(document, queue.current()));
      for (const side of ['A', 'B'] as const) {
        document
          .getElementById(`pick-${side.toLowerCase()}`)
          ?.addEventListener('click', async () => {
            const verdict = await queue.submit(side);
            judgingPanel.appendChild(renderVerdictToast(document, verdict));
            redrawJudging();
          });
      }
    };
    redrawJudging();
  } catch {
    judgingPanel.textContent = 'judging disabled (no evaluation manifest)';
  }
}

void boot();
