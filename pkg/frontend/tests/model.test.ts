import { describe, expect, it } from "vitest";

import { formatDuration, jobRow, poolSeries, savingsPercent, templateFields } from "../src/model.js";
import type { JobOut, TimelinePoint } from "../src/types.js";

function job(partial: Partial<JobOut>): JobOut {
  return {
    id: "j-000001",
    owner: "alice",
    queue: "prod",
    state: "pending",
    requeues: 0,
    submit_time: 100,
    claim_time: null,
    stage_done_time: null,
    end_time: null,
    assigned_instance: null,
    exit_code: null,
    failure: null,
    markers: [],
    ...partial,
  };
}

describe("jobRow", () => {
  it("computes wait, stage, and exec durations from timestamps", () => {
    const row = jobRow(
      job({
        state: "completed",
        claim_time: 160,
        stage_done_time: 190,
        end_time: 790,
        exit_code: 0,
      }),
    );
    expect(row.waitSecs).toBe(60);
    expect(row.stageSecs).toBe(30);
    expect(row.execSecs).toBe(600);
    expect(row.outcome).toBe("ok");
  });

  it("leaves durations empty while the job waits", () => {
    const row = jobRow(job({}));
    expect(row.waitSecs).toBeNull();
    expect(row.stageSecs).toBeNull();
    expect(row.execSecs).toBeNull();
  });

  it("shows failure reason and last marker progress", () => {
    const failed = jobRow(job({ state: "failed", failure: "TIMED_OUT" }));
    expect(failed.outcome).toBe("TIMED_OUT");
    const progressing = jobRow(
      job({
        state: "active",
        markers: [
          { time: 1, cpu_util: 0.5, ram_util: 0.4, io_util: 0.1, progress: "40%" },
          { time: 2, cpu_util: 0.6, ram_util: 0.4, io_util: 0.1, progress: "65%" },
        ],
      }),
    );
    expect(progressing.progress).toBe("65%");
  });
});

describe("formatDuration", () => {
  it("renders humane durations", () => {
    expect(formatDuration(null)).toBe("-");
    expect(formatDuration(42)).toBe("42s");
    expect(formatDuration(90)).toBe("1m30s");
    expect(formatDuration(3720)).toBe("1h02m");
  });
});

describe("poolSeries", () => {
  const points: TimelinePoint[] = [
    { t: 0, provisioned: 0, idle: 0, pending: 2, active: 0 },
    { t: 60, provisioned: 4, idle: 1, pending: 0, active: 3 },
    { t: 120, provisioned: 4, idle: 4, pending: 0, active: 0 },
  ];

  it("derives idle fraction and peak", () => {
    const series = poolSeries(points);
    expect(series.maxProvisioned).toBe(4);
    expect(series.idleFraction).toEqual([0, 0.25, 1]);
    expect(series.provisioned).toEqual([0, 4, 4]);
  });

  it("handles an empty recording", () => {
    expect(poolSeries([]).maxProvisioned).toBe(0);
  });
});

describe("templateFields", () => {
  it("exposes parameters with defaults, marking server-filled ones", () => {
    const fields = templateFields({
      name: "sleep-demo",
      description: {
        owner: "${user}",
        queue: "dev",
        inputs: [],
        script: "sleep ${seconds}",
        outputs: [],
        max_walltime_secs: 7200,
      },
      defaults: { seconds: "60" },
      parameters: ["seconds", "user"],
    });
    expect(fields).toEqual([
      { name: "seconds", value: "60", implicit: false },
      { name: "user", value: "", implicit: true },
    ]);
  });
});

describe("savingsPercent", () => {
  it("compares spot against the on-demand equivalent", () => {
    expect(savingsPercent(39, 100)).toBeCloseTo(61);
    expect(savingsPercent(0, 0)).toBeNull();
  });
});
