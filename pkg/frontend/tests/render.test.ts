import { describe, expect, it } from "vitest";

import {
  escapeHtml,
  renderAuditLines,
  renderJobsTable,
  renderObjectsTable,
  renderPoolChart,
  renderPoolSummary,
} from "../src/render.js";
import type { JobOut, TimelinePoint } from "../src/types.js";

const completed: JobOut = {
  id: "j-000001",
  owner: "alice",
  queue: "prod",
  state: "completed",
  requeues: 1,
  submit_time: 0,
  claim_time: 60,
  stage_done_time: 90,
  end_time: 690,
  assigned_instance: "i-00001",
  exit_code: 0,
  failure: null,
  markers: [],
};

describe("renderJobsTable", () => {
  it("renders one row per job with state badge and durations", () => {
    const html = renderJobsTable([completed]);
    expect(html).toContain('data-job="j-000001"');
    expect(html).toContain('class="badge completed"');
    expect(html).toContain("<td>1m00s</td>"); // wait
    expect(html).toContain("<td>30s</td>"); // stage
    expect(html).toContain("<td>10m00s</td>"); // exec
  });

  it("escapes untrusted text", () => {
    const sneaky = { ...completed, state: "failed", failure: "<script>x</script>" };
    const html = renderJobsTable([sneaky]);
    expect(html).not.toContain("<script>x");
    expect(html).toContain("&lt;script&gt;");
  });

  it("renders an empty hint without jobs", () => {
    expect(renderJobsTable([])).toContain("No jobs yet");
  });
});

describe("renderPoolChart", () => {
  const points: TimelinePoint[] = Array.from({ length: 10 }, (_, i) => ({
    t: i * 60,
    provisioned: Math.min(i, 6),
    idle: i > 6 ? i - 6 : 0,
    pending: 0,
    active: Math.min(i, 6),
  }));

  it("draws provisioned and idle polylines", () => {
    const svg = renderPoolChart(points);
    expect(svg).toContain("<svg");
    expect(svg).toContain('class="provisioned"');
    expect(svg).toContain('class="idle"');
    expect(svg.match(/<polyline/g)).toHaveLength(2);
    expect(svg).toContain("max 6");
  });

  it("explains an empty recording", () => {
    expect(renderPoolChart([])).toContain("No pool activity");
  });
});

describe("renderObjectsTable", () => {
  it("includes tier markers and a share button per object", () => {
    const html = renderObjectsTable([
      {
        bucket: "user-alice",
        key: "results/a.bin",
        size_gb: 2.5,
        tier: "archive",
        owner: "alice",
        created_at: 0,
        last_access: 0,
        encrypted_at_rest: true,
      },
    ]);
    expect(html).toContain("tier-archive");
    expect(html).toContain('class="share"');
    expect(html).toContain('data-key="results/a.bin"');
  });
});

describe("renderPoolSummary", () => {
  it("summarizes each pool", () => {
    const html = renderPoolSummary([
      {
        queue_class: "prod",
        strategy: "unlimited",
        provisioned: 12,
        idle: 3,
        pending_jobs: 4,
        active_jobs: 9,
        instances: [],
      },
    ]);
    expect(html).toContain("12 provisioned, 3 idle");
    expect(html).toContain("4 pending / 9 active");
  });
});

describe("renderAuditLines", () => {
  it("renders the pipe-separated export format", () => {
    const html = renderAuditLines([
      {
        seq: 0,
        time: 0,
        iso_time: "1970-01-01T00:00:00Z",
        actor: "user:alice",
        action: "read",
        resource: "datasets/a",
        outcome: "allowed",
      },
    ]);
    expect(html).toContain("0|1970-01-01T00:00:00Z|user:alice|read|datasets/a|allowed");
  });
});

describe("escapeHtml", () => {
  it("escapes the dangerous four", () => {
    expect(escapeHtml('<a href="x">&</a>')).toBe("&lt;a href=&quot;x&quot;&gt;&amp;&lt;/a&gt;");
  });
});
