// DOM-level dashboard test against a scripted fake of the monitor
// service: the alert card renders, a False verdict posts and the
// displayed reliability drops 1 -> 0 (single-alert all-false case), the
// window's threshold line rises, and a duplicate verdict surfaces 409 as
// "already judged".

import { beforeEach, describe, expect, it, vi } from 'vitest';

import { mountDashboard } from '../dist/app.js';
import { Poller } from '../dist/poller.js';

const SHELL = `
  <div id="status"></div>
  <select id="chart-length"><option value="15">15</option></select>
  <input id="token">
  <div id="notice"></div>
  <div id="chart"></div>
  <div id="alerts"></div>
`;

interface FakeService {
  r: number;
  alertState: string;
  tmd10: number;
  verdictPosts: Array<{ id: number; body: unknown }>;
  failAll: boolean;
}

function makeFetch(svc: FakeService) {
  return vi.fn(async (url: string, init?: RequestInit) => {
    if (svc.failAll) throw new TypeError('network down');
    const json = (data: unknown, status = 200) =>
      new Response(JSON.stringify(data), {
        status,
        headers: { 'Content-Type': 'application/json' },
      });

    if (url === '/status') {
      return json({
        in_learning: false,
        elapsed_days: 15,
        learning_days: 14,
        start_date: '2024-01-01',
        last_processed: '2024-01-16T00:00:00Z',
        current_pattern: 'Mutable',
        flow_lpm: 3.1,
        reliability_r: svc.r,
        judged_alerts: svc.alertState === 'Confirmed' ? 0 : 1,
        open_alerts: svc.alertState === 'Confirmed' ? 1 : 0,
        fire_alarm_suppressed: false,
        config_fingerprint: 'abc',
      });
    }
    if (url === '/alerts') {
      return json([
        {
          id: 1,
          criterion: 'AverageDeviation',
          state: svc.alertState,
          span: ['2024-01-15T10:00:00Z', '2024-01-15T10:15:00Z'],
          measured: 57.2,
          threshold: 23.46,
          raised_at: '2024-01-15T10:15:00Z',
          horizon: [15, 30],
          confirm_span: ['2024-01-15T10:00:00Z', '2024-01-15T10:30:00Z'],
          confirm_measured: 114.4,
          confirm_threshold: 46.93,
        },
      ]);
    }
    if (url === '/report/15') {
      return json([
        { window_start: '09:45', consumption: 4.2, md: 20.0, tmd: 20.0, alert_state: null },
        { window_start: '10:00', consumption: 57.2, md: 23.46, tmd: svc.tmd10,
          alert_state: svc.alertState === 'Confirmed' ? 'Confirmed' : 'JudgedFalse' },
      ]);
    }
    const verdict = url.match(/^\/alerts\/(\d+)\/verdict$/);
    if (verdict && init?.method === 'POST') {
      const id = Number(verdict[1]);
      svc.verdictPosts.push({ id, body: JSON.parse(String(init.body)) });
      if (svc.alertState !== 'Confirmed') {
        return json({ detail: `alert ${id} already judged` }, 409);
      }
      // single false verdict: AN=1, FN=1, LN=0 -> r = 0; TMD = 1.05 * MD
      svc.alertState = 'JudgedFalse';
      svc.r = 0.0;
      svc.tmd10 = 23.46 * 1.05;
      return json({ r: 0.0, an: 1, fn: 1, ln: 0, tmd: svc.tmd10 });
    }
    return json({ detail: 'not found' }, 404);
  });
}

const flush = async () => {
  for (let i = 0; i < 4; i++) await new Promise((r) => setTimeout(r, 0));
};

function statusValues(): Record<string, string> {
  const out: Record<string, string> = {};
  document.querySelectorAll('#status .stat').forEach((node) => {
    out[node.querySelector('.stat-label')!.textContent!] =
      node.querySelector('.stat-value')!.textContent!;
  });
  return out;
}

describe('dashboard', () => {
  let svc: FakeService;

  beforeEach(() => {
    document.body.innerHTML = SHELL;
    window.localStorage.clear();
    svc = { r: 1.0, alertState: 'Confirmed', tmd10: 23.46, verdictPosts: [], failAll: false };
    vi.stubGlobal('fetch', makeFetch(svc));
  });

  it('shows the confirmed alert card with measured vs threshold', async () => {
    const dash = mountDashboard(document);
    await dash.refresh();

    expect(statusValues()['reliability r']).toBe('1.000');
    expect(statusValues()['learning']).toBe('complete');

    const cards = document.querySelectorAll('#alerts .inbox .card');
    expect(cards.length).toBe(1);
    const card = cards[0] as HTMLElement;
    expect(card.textContent).toContain('114.40');
    expect(card.textContent).toContain('46.93');
    expect(card.querySelectorAll('button').length).toBe(2);

    const bars = document.querySelectorAll('#chart .bar');
    expect(bars.length).toBe(2);
  });

  it('false verdict posts, drops displayed r to 0, and raises the threshold line', async () => {
    const dash = mountDashboard(document);
    await dash.refresh();

    const falseBtn = Array.from(
      document.querySelectorAll('#alerts .inbox .card button'),
    ).find((b) => b.textContent === 'False alert') as HTMLButtonElement;
    falseBtn.click();
    await flush();

    expect(svc.verdictPosts).toEqual([{ id: 1, body: { verdict: 'false' } }]);
    expect(statusValues()['reliability r']).toBe('0.000');

    // card resolved into history, no longer actionable
    expect(document.querySelectorAll('#alerts .inbox .card').length).toBe(0);
    const resolved = document.querySelector('#alerts .history .card') as HTMLElement;
    expect(resolved.className).toContain('state-judgedfalse');
    expect(resolved.querySelectorAll('button').length).toBe(0);

    // notice echoes the tuned threshold from the service response
    expect(document.getElementById('notice')!.textContent).toContain('r=0.000');
    expect(document.getElementById('notice')!.textContent).toContain('24.63');

    // the 10:00 window's threshold line rose above its raw ceiling
    const line = Array.from(document.querySelectorAll('#chart line')).find(
      (l) => (l as SVGLineElement).dataset.window === '10:00',
    ) as SVGLineElement;
    expect(Number(line.dataset.tmd)).toBeCloseTo(23.46 * 1.05, 6);
    expect(line.getAttribute('class')).toContain('tuned');
  });

  it('surfaces a duplicate verdict as already judged', async () => {
    const dash = mountDashboard(document);
    await dash.refresh();

    const falseBtn = Array.from(
      document.querySelectorAll('#alerts .inbox .card button'),
    ).find((b) => b.textContent === 'False alert') as HTMLButtonElement;
    falseBtn.click();
    falseBtn.click(); // double-click: second post hits 409
    await flush();

    expect(svc.verdictPosts.length).toBe(2);
    expect(document.getElementById('notice')!.textContent).toContain('already judged');
  });

  it('renders an offline banner without crashing and recovers', async () => {
    const dash = mountDashboard(document);
    svc.failAll = true;
    await dash.refresh();
    expect(document.querySelector('#status .banner.offline')).not.toBeNull();

    svc.failAll = false;
    await dash.refresh();
    expect(statusValues()['flow']).toBe('3.1 L/min');
  });

  it('coalesces concurrent polls to one in flight', async () => {
    let active = 0;
    let peak = 0;
    const poller = new Poller(async () => {
      active += 1;
      peak = Math.max(peak, active);
      await new Promise((r) => setTimeout(r, 5));
      active -= 1;
    }, 1000);
    await Promise.all([poller.tick(), poller.tick(), poller.tick()]);
    expect(peak).toBe(1);
  });
});
