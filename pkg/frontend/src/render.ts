// HTML/SVG renderers. Pure string builders: the DOM layer just assigns
// innerHTML, which keeps every visual decision unit-testable.

import { formatDuration, jobRow, poolSeries } from "./model.js";
import type { JobOut, ObjectOut, PoolOut, TimelinePoint, AuditRecordOut } from "./types.js";

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, "&amp;")
    .replace(/</g, "&lt;")
    .replace(/>/g, "&gt;")
    .replace(/"/g, "&quot;");
}

export function renderJobsTable(jobs: JobOut[]): string {
  if (!jobs.length) return `<p class="empty">No jobs yet. Submit one above.</p>`;
  const rows = jobs
    .map((job) => {
      const row = jobRow(job);
      return (
        `<tr data-job="${row.id}" class="state-${row.state}">` +
        `<td class="mono">${row.id}</td>` +
        `<td><span class="badge ${row.state}">${row.state}</span></td>` +
        `<td>${row.queue}</td>` +
        `<td>${formatDuration(row.waitSecs)}</td>` +
        `<td>${formatDuration(row.stageSecs)}</td>` +
        `<td>${formatDuration(row.execSecs)}</td>` +
        `<td>${row.requeues}</td>` +
        `<td>${escapeHtml(row.progress || row.outcome)}</td>` +
        `</tr>`
      );
    })
    .join("");
  return (
    `<table><thead><tr>` +
    `<th>job</th><th>state</th><th>queue</th><th>wait</th><th>stage</th>` +
    `<th>exec</th><th>requeues</th><th>progress</th>` +
    `</tr></thead><tbody>${rows}</tbody></table>`
  );
}

// Provisioned vs idle over time, the operator's capacity picture.
export function renderPoolChart(points: TimelinePoint[], width = 640, height = 160): string {
  const series = poolSeries(points);
  if (!series.t.length) return `<p class="empty">No pool activity recorded yet.</p>`;
  const t0 = series.t[0];
  const span = Math.max(series.t[series.t.length - 1] - t0, 1);
  const yMax = Math.max(series.maxProvisioned, 1);
  const x = (t: number) => ((t - t0) / span) * (width - 40) + 30;
  const y = (v: number) => height - 20 - (v / yMax) * (height - 40);
  const line = (values: number[]) =>
    series.t.map((t, i) => `${x(t).toFixed(1)},${y(values[i]).toFixed(1)}`).join(" ");
  return (
    `<svg viewBox="0 0 ${width} ${height}" role="img" aria-label="pool timeline">` +
    `<polyline class="provisioned" fill="none" points="${line(series.provisioned)}"/>` +
    `<polyline class="idle" fill="none" points="${line(series.idle)}"/>` +
    `<text x="30" y="12" class="legend">provisioned (max ${series.maxProvisioned})</text>` +
    `<text x="240" y="12" class="legend legend-idle">idle</text>` +
    `</svg>`
  );
}

export function renderObjectsTable(objects: ObjectOut[]): string {
  if (!objects.length) return `<p class="empty">Bucket is empty.</p>`;
  const rows = objects
    .map(
      (obj) =>
        `<tr data-key="${escapeHtml(obj.key)}">` +
        `<td class="mono">${escapeHtml(obj.key)}</td>` +
        `<td>${obj.size_gb.toFixed(2)} GB</td>` +
        `<td><span class="tier tier-${obj.tier}">${obj.tier}</span></td>` +
        `<td>${escapeHtml(obj.owner)}</td>` +
        `<td><button class="share" data-bucket="${escapeHtml(obj.bucket)}" data-key="${escapeHtml(obj.key)}">share</button></td>` +
        `</tr>`,
    )
    .join("");
  return (
    `<table><thead><tr><th>key</th><th>size</th><th>tier</th><th>owner</th><th></th></tr></thead>` +
    `<tbody>${rows}</tbody></table>`
  );
}

export function renderPoolSummary(pools: PoolOut[]): string {
  return pools
    .map(
      (pool) =>
        `<div class="pool-card" data-pool="${pool.queue_class}">` +
        `<h3>${pool.queue_class} <small>${escapeHtml(pool.strategy)}</small></h3>` +
        `<p>${pool.provisioned} provisioned, ${pool.idle} idle</p>` +
        `<p>${pool.pending_jobs} pending / ${pool.active_jobs} active jobs</p>` +
        `</div>`,
    )
    .join("");
}

export function renderAuditLines(records: AuditRecordOut[]): string {
  const lines = records
    .map(
      (r) =>
        `${r.seq}|${r.iso_time}|${escapeHtml(r.actor)}|${r.action}|${escapeHtml(r.resource)}|${r.outcome}`,
    )
    .join("\n");
  return `<pre class="audit">${lines || "(no matching records)"}</pre>`;
}
