// DOM renderers. Each takes a container and the latest service data and
// rebuilds its subtree; the dashboard holds no state of its own beyond
// view preferences.

import type { Alert, ReportRow, Status } from './api.js';

export function el(tag: string, cls?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (cls) node.className = cls;
  if (text !== undefined) node.textContent = text;
  return node;
}

const fmt = (x: number | null | undefined, digits = 2): string =>
  x === null || x === undefined ? '–' : x.toFixed(digits);

export function renderStatus(container: HTMLElement, status: Status | null): void {
  container.replaceChildren();
  if (status === null) {
    const banner = el('div', 'banner offline', 'service unreachable');
    container.appendChild(banner);
    return;
  }
  const bits: Array<[string, string]> = [
    [
      'learning',
      status.in_learning
        ? `day ${status.elapsed_days}/${status.learning_days}`
        : 'complete',
    ],
    ['pattern', status.current_pattern ?? '–'],
    ['flow', `${fmt(status.flow_lpm, 1)} L/min`],
    ['reliability r', fmt(status.reliability_r, 3)],
    ['open alerts', String(status.open_alerts)],
  ];
  for (const [label, value] of bits) {
    const cell = el('div', 'stat');
    cell.appendChild(el('span', 'stat-label', label));
    cell.appendChild(el('span', 'stat-value', value));
    container.appendChild(cell);
  }
  if (status.fire_alarm_suppressed) {
    container.appendChild(el('div', 'banner fire', 'fire alarm: alerting suppressed'));
  }
}

export interface InboxHandlers {
  onVerdict(alertId: number, verdict: 'real' | 'false'): void;
}

function alertCard(alert: Alert, handlers: InboxHandlers, actionable: boolean): HTMLElement {
  const card = el('div', `card state-${alert.state.toLowerCase()}`);
  card.dataset.alertId = String(alert.id);
  const title = alert.criterion === 'SteadyConsumption'
    ? 'steady consumption'
    : `deviation ${alert.horizon ? alert.horizon.join('→') : ''}`;
  card.appendChild(el('div', 'card-title', `#${alert.id} ${title}`));
  card.appendChild(el('div', 'card-span', `${alert.span[0]} – ${alert.span[1]}`));
  const measured = alert.confirm_measured ?? alert.measured;
  const threshold = alert.confirm_threshold ?? alert.threshold;
  card.appendChild(
    el('div', 'card-measure', `measured ${fmt(measured)} vs threshold ${fmt(threshold)}`),
  );
  card.appendChild(el('div', 'card-state', alert.state));
  if (actionable) {
    const row = el('div', 'card-actions');
    const real = el('button', 'btn real', 'Real leak') as HTMLButtonElement;
    real.addEventListener('click', () => handlers.onVerdict(alert.id, 'real'));
    const dismiss = el('button', 'btn false', 'False alert') as HTMLButtonElement;
    dismiss.addEventListener('click', () => handlers.onVerdict(alert.id, 'false'));
    row.appendChild(real);
    row.appendChild(dismiss);
    card.appendChild(row);
  }
  return card;
}

export function renderInbox(
  container: HTMLElement,
  alerts: Alert[],
  handlers: InboxHandlers,
): void {
  container.replaceChildren();
  const open = alerts.filter((a) => a.state === 'Confirmed');
  const resolved = alerts.filter(
    (a) => a.state === 'JudgedReal' || a.state === 'JudgedFalse',
  );
  const inbox = el('div', 'inbox');
  inbox.appendChild(el('h2', undefined, `inbox (${open.length})`));
  if (open.length === 0) inbox.appendChild(el('p', 'empty', 'no confirmed alerts'));
  for (const alert of open) inbox.appendChild(alertCard(alert, handlers, true));
  container.appendChild(inbox);

  const history = el('div', 'history');
  history.appendChild(el('h2', undefined, `history (${resolved.length})`));
  for (const alert of resolved.slice().reverse()) {
    history.appendChild(alertCard(alert, handlers, false));
  }
  container.appendChild(history);
}

const CHART_W = 960;
const CHART_H = 220;
const SVG_NS = 'http://www.w3.org/2000/svg';

export function renderChart(container: HTMLElement, rows: ReportRow[]): void {
  container.replaceChildren();
  if (rows.length === 0) {
    container.appendChild(el('p', 'empty', 'no report data yet'));
    return;
  }
  const peak = Math.max(
    1,
    ...rows.map((r) => Math.max(r.consumption ?? 0, r.tmd, r.md)),
  );
  const scaleY = (v: number) => CHART_H - (v / peak) * (CHART_H - 10);
  const barW = CHART_W / rows.length;

  const svg = document.createElementNS(SVG_NS, 'svg');
  svg.setAttribute('viewBox', `0 0 ${CHART_W} ${CHART_H + 18}`);
  svg.setAttribute('class', 'chart');

  rows.forEach((row, i) => {
    const x = i * barW;
    if (row.consumption !== null) {
      const bar = document.createElementNS(SVG_NS, 'rect');
      bar.setAttribute('x', String(x + 1));
      bar.setAttribute('y', String(scaleY(row.consumption)));
      bar.setAttribute('width', String(Math.max(barW - 2, 1)));
      bar.setAttribute('height', String(CHART_H - scaleY(row.consumption)));
      let cls = 'bar';
      if (row.alert_state) cls += ` alert-${row.alert_state.toLowerCase()}`;
      else if (row.consumption > row.tmd) cls += ' exceeding';
      bar.setAttribute('class', cls);
      bar.dataset.window = row.window_start;
      svg.appendChild(bar);
    }
    const line = document.createElementNS(SVG_NS, 'line');
    line.setAttribute('x1', String(x));
    line.setAttribute('x2', String(x + barW));
    line.setAttribute('y1', String(scaleY(row.tmd)));
    line.setAttribute('y2', String(scaleY(row.tmd)));
    line.setAttribute('class', row.tmd > row.md ? 'threshold tuned' : 'threshold');
    line.dataset.window = row.window_start;
    line.dataset.tmd = String(row.tmd);
    svg.appendChild(line);
    if (i % Math.ceil(rows.length / 12) === 0) {
      const label = document.createElementNS(SVG_NS, 'text');
      label.setAttribute('x', String(x + 2));
      label.setAttribute('y', String(CHART_H + 14));
      label.setAttribute('class', 'tick');
      label.textContent = row.window_start;
      svg.appendChild(label);
    }
  });
  container.appendChild(svg);
}

export function renderMessage(container: HTMLElement, text: string): void {
  container.replaceChildren(el('div', 'banner note', text));
}
