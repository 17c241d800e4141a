// Pure view-model transforms: everything the views display is computed
// here from gateway payloads, so it can be tested without a DOM.

import type { JobOut, TemplateOut, TimelinePoint } from "./types.js";

export interface JobRow {
  id: string;
  owner: string;
  queue: string;
  state: string;
  requeues: number;
  waitSecs: number | null;
  stageSecs: number | null;
  execSecs: number | null;
  progress: string;
  outcome: string;
}

export function jobRow(job: JobOut): JobRow {
  const wait = job.claim_time !== null ? job.claim_time - job.submit_time : null;
  const stage =
    job.stage_done_time !== null && job.claim_time !== null
      ? job.stage_done_time - job.claim_time
      : null;
  const exec =
    job.end_time !== null && job.stage_done_time !== null
      ? job.end_time - job.stage_done_time
      : null;
  const lastMarker = job.markers.length ? job.markers[job.markers.length - 1] : null;
  let outcome = "";
  if (job.state === "failed") outcome = job.failure ?? `exit ${job.exit_code}`;
  else if (job.state === "completed") outcome = "ok";
  return {
    id: job.id,
    owner: job.owner,
    queue: job.queue,
    state: job.state,
    requeues: job.requeues,
    waitSecs: wait,
    stageSecs: stage,
    execSecs: exec,
    progress: lastMarker ? lastMarker.progress : "",
    outcome,
  };
}

export function formatDuration(seconds: number | null): string {
  if (seconds === null) return "-";
  if (seconds < 0) return "-";
  const whole = Math.round(seconds);
  const h = Math.floor(whole / 3600);
  const m = Math.floor((whole % 3600) / 60);
  const s = whole % 60;
  if (h > 0) return `${h}h${String(m).padStart(2, "0")}m`;
  if (m > 0) return `${m}m${String(s).padStart(2, "0")}s`;
  return `${s}s`;
}

export interface PoolSeries {
  t: number[];
  provisioned: number[];
  idle: number[];
  idleFraction: number[];
  maxProvisioned: number;
}

export function poolSeries(points: TimelinePoint[]): PoolSeries {
  const t = points.map((p) => p.t);
  const provisioned = points.map((p) => p.provisioned);
  const idle = points.map((p) => p.idle);
  const idleFraction = points.map((p) => (p.provisioned > 0 ? p.idle / p.provisioned : 0));
  return {
    t,
    provisioned,
    idle,
    idleFraction,
    maxProvisioned: provisioned.length ? Math.max(...provisioned) : 0,
  };
}

export interface TemplateField {
  name: string;
  value: string;
  implicit: boolean; // filled by the server (e.g. the session user)
}

export function templateFields(template: TemplateOut): TemplateField[] {
  return template.parameters.map((name) => ({
    name,
    value: template.defaults[name] ?? "",
    implicit: name === "user",
  }));
}

export function savingsPercent(spot: number, onDemandEquivalent: number): number | null {
  if (onDemandEquivalent <= 0) return null;
  return ((onDemandEquivalent - spot) / onDemandEquivalent) * 100;
}
