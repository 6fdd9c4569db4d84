// Typed client for the monitor service. The dashboard renders service
// responses verbatim; nothing is recomputed client-side.

export interface Status {
  in_learning: boolean;
  elapsed_days: number;
  learning_days: number;
  start_date: string | null;
  last_processed: string | null;
  current_pattern: string | null;
  flow_lpm: number | null;
  reliability_r: number;
  judged_alerts: number;
  open_alerts: number;
  fire_alarm_suppressed: boolean;
  config_fingerprint: string;
}

export interface Alert {
  id: number;
  criterion: 'AverageDeviation' | 'SteadyConsumption';
  state: string;
  span: [string, string];
  measured: number;
  threshold: number;
  raised_at: string;
  horizon: [number, number] | null;
  confirm_span?: [string, string];
  confirm_measured?: number;
  confirm_threshold?: number;
}

export interface VerdictResult {
  r: number;
  an: number;
  fn: number;
  ln: number;
  tmd: number | null;
}

export interface ReportRow {
  window_start: string;
  consumption: number | null;
  md: number;
  tmd: number;
  alert_state: string | null;
}

export class ApiError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class ApiClient {
  constructor(
    private baseUrl: string = '',
    private token: string | null = null,
  ) {}

  private headers(): Record<string, string> {
    const h: Record<string, string> = { 'Content-Type': 'application/json' };
    if (this.token) h['Authorization'] = `Bearer ${this.token}`;
    return h;
  }

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const res = await fetch(`${this.baseUrl}${path}`, init);
    if (!res.ok) {
      let detail = res.statusText;
      try {
        const body = await res.json();
        if (body && typeof body.detail === 'string') detail = body.detail;
      } catch {
        // non-JSON error body; keep statusText
      }
      throw new ApiError(res.status, detail);
    }
    return res.json() as Promise<T>;
  }

  status(): Promise<Status> {
    return this.request<Status>('/status');
  }

  alerts(state?: string): Promise<Alert[]> {
    const query = state ? `?state=${encodeURIComponent(state)}` : '';
    return this.request<Alert[]>(`/alerts${query}`);
  }

  verdict(alertId: number, verdict: 'real' | 'false'): Promise<VerdictResult> {
    return this.request<VerdictResult>(`/alerts/${alertId}/verdict`, {
      method: 'POST',
      headers: this.headers(),
      body: JSON.stringify({ verdict }),
    });
  }

  fireAlarm(active: boolean): Promise<{ fire_alarm_suppressed: boolean }> {
    return this.request(`/fire-alarm`, {
      method: 'POST',
      headers: this.headers(),
      body: JSON.stringify({ active }),
    });
  }

  report(length: number): Promise<ReportRow[]> {
    return this.request<ReportRow[]>(`/report/${length}`);
  }
}
