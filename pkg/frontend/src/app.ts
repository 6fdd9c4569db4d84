// Dashboard bootstrap: wires the API client, the poller, and the three
// views (status strip, alert inbox, window chart) to the static page.

import { ApiClient, ApiError } from './api.js';
import { Poller } from './poller.js';
import {
  InboxHandlers,
  renderChart,
  renderInbox,
  renderMessage,
  renderStatus,
} from './views.js';

interface Prefs {
  pollMs: number;
  token: string;
  chartLength: number;
}

const PREFS_KEY = 'leakwatch-prefs';

export function loadPrefs(storage: Storage): Prefs {
  try {
    const raw = storage.getItem(PREFS_KEY);
    if (raw) {
      const parsed = JSON.parse(raw);
      return {
        pollMs: Number(parsed.pollMs) || 2000,
        token: typeof parsed.token === 'string' ? parsed.token : '',
        chartLength: Number(parsed.chartLength) || 15,
      };
    }
  } catch {
    // corrupted prefs: fall through to defaults
  }
  return { pollMs: 2000, token: '', chartLength: 15 };
}

export function savePrefs(storage: Storage, prefs: Prefs): void {
  storage.setItem(PREFS_KEY, JSON.stringify(prefs));
}

export interface Dashboard {
  poller: Poller;
  refresh(): Promise<void>;
}

export function mountDashboard(root: Document, baseUrl = ''): Dashboard {
  const statusBox = root.getElementById('status')!;
  const inboxBox = root.getElementById('alerts')!;
  const chartBox = root.getElementById('chart')!;
  const noticeBox = root.getElementById('notice')!;
  const lengthSelect = root.getElementById('chart-length') as HTMLSelectElement | null;
  const tokenInput = root.getElementById('token') as HTMLInputElement | null;

  const prefs = loadPrefs(root.defaultView?.localStorage ?? window.localStorage);
  if (lengthSelect) lengthSelect.value = String(prefs.chartLength);
  if (tokenInput) tokenInput.value = prefs.token;

  let client = new ApiClient(baseUrl, prefs.token || null);

  const handlers: InboxHandlers = {
    onVerdict(alertId, verdict) {
      void (async () => {
        try {
          const result = await client.verdict(alertId, verdict);
          renderMessage(
            noticeBox,
            `alert #${alertId} judged ${verdict}: r=${result.r.toFixed(3)}` +
              (result.tmd !== null ? `, window threshold now ${result.tmd.toFixed(2)} L` : ''),
          );
        } catch (err) {
          if (err instanceof ApiError && err.status === 409) {
            renderMessage(noticeBox, `alert #${alertId} already judged`);
          } else {
            renderMessage(noticeBox, `verdict failed: ${String(err)}`);
          }
        }
        await dashboard.refresh();
      })();
    },
  };

  async function refresh(): Promise<void> {
    try {
      const [status, alerts, rows] = await Promise.all([
        client.status(),
        client.alerts(),
        client.report(prefs.chartLength),
      ]);
      renderStatus(statusBox, status);
      renderInbox(inboxBox, alerts, handlers);
      renderChart(chartBox, rows);
    } catch {
      renderStatus(statusBox, null); // offline banner, keep polling
    }
  }

  const dashboard: Dashboard = { poller: new Poller(refresh, prefs.pollMs), refresh };

  lengthSelect?.addEventListener('change', () => {
    prefs.chartLength = Number(lengthSelect.value) || 15;
    savePrefs(root.defaultView?.localStorage ?? window.localStorage, prefs);
    void dashboard.refresh();
  });
  tokenInput?.addEventListener('change', () => {
    prefs.token = tokenInput.value.trim();
    client = new ApiClient(baseUrl, prefs.token || null);
    savePrefs(root.defaultView?.localStorage ?? window.localStorage, prefs);
  });

  return dashboard;
}

// browser entry point; tests import mountDashboard directly
if (typeof document !== 'undefined' && document.getElementById('status')) {
  mountDashboard(document).poller.start();
}
