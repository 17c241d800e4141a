// In-memory stand-in for the /v1 gateway, mirroring its contract closely
// enough to exercise the dashboard flows: template submission, job
// listing, signing and anonymous fetch with expiry, pool timeline.

import type { JobOut, TimelinePoint } from "../src/types.js";

interface SignedEntry {
  bucket: string;
  key: string;
  expiry: number;
  sig: string;
}

export class FakeGateway {
  now = 0;
  jobs: JobOut[] = [];
  timeline: TimelinePoint[] = [];
  private seq = 0;
  private signed = new Map<string, SignedEntry>();
  private sessions = new Map<string, string>();
  requests: string[] = [];

  objects = [
    {
      bucket: "user-alice",
      key: "results/model.bin",
      size_gb: 2.5,
      tier: "hot",
      owner: "alice",
      created_at: 0,
      last_access: 0,
      encrypted_at_rest: true,
    },
  ];

  template = {
    name: "sleep-demo",
    description: {
      owner: "${user}",
      queue: "dev",
      inputs: [],
      script: "sleep ${seconds}",
      outputs: ["result.txt"],
      max_walltime_secs: 7200,
    },
    defaults: { seconds: "60" },
    parameters: ["seconds", "user"],
  };

  fetch = async (url: string, init?: RequestInit): Promise<Response> => {
    const method = init?.method ?? "GET";
    const parsed = new URL(url, "http://gateway");
    const path = parsed.pathname;
    this.requests.push(`${method} ${path}`);
    const auth = (init?.headers as Record<string, string>)?.["Authorization"];
    const body = init?.body ? JSON.parse(String(init.body)) : undefined;

    const json = (status: number, payload: unknown) =>
      new Response(JSON.stringify(payload), {
        status,
        headers: { "Content-Type": "application/json" },
      });
    const error = (status: number, code: string, message = code) =>
      json(status, { error: { code, message } });

    if (method === "POST" && path === "/v1/auth/login") {
      const token = `tok-${++this.seq}`;
      this.sessions.set(token, body.user_id);
      return json(200, {
        token,
        subject: body.user_id,
        roles: ["submitter"],
        expires_at: this.now + 3600,
      });
    }

    const user = auth?.startsWith("Bearer ") ? this.sessions.get(auth.slice(7)) : undefined;
    const needsAuth = !path.startsWith("/v1/fetch");
    if (needsAuth && !user) return error(401, "INVALID_TOKEN");

    if (method === "GET" && path === "/v1/templates") {
      return json(200, { templates: [this.template] });
    }
    if (method === "POST" && path === "/v1/templates/sleep-demo/submit") {
      const params = { ...this.template.defaults, ...body.parameters, user };
      const job: JobOut = {
        id: `j-${String(++this.seq).padStart(6, "0")}`,
        owner: String(user),
        queue: "dev",
        state: "pending",
        requeues: 0,
        submit_time: this.now,
        claim_time: null,
        stage_done_time: null,
        end_time: null,
        assigned_instance: null,
        exit_code: null,
        failure: null,
        markers: [],
      };
      if (!/^\d+(\.\d+)?$/.test(String(params.seconds))) {
        return error(422, "INVALID_DESCRIPTION", "seconds must be numeric");
      }
      this.jobs.push(job);
      return json(201, job);
    }
    if (method === "GET" && path === "/v1/jobs") {
      return json(200, { jobs: this.jobs, next_cursor: null });
    }
    if (method === "GET" && path === "/v1/pool/timeline") {
      return json(200, { points: this.timeline });
    }
    if (method === "GET" && path.startsWith("/v1/objects/")) {
      return json(200, { objects: this.objects });
    }
    if (method === "POST" && path.startsWith("/v1/sign/")) {
      const bucket = path.split("/")[3];
      const expiry = this.now + body.ttl_seconds;
      const sig = `sig${++this.seq}abc`;
      const entry = { bucket, key: body.key, expiry, sig };
      this.signed.set(sig, entry);
      return json(200, {
        url: `kotta://${bucket}/${body.key}?exp=${Math.floor(expiry)}&sig=${sig}`,
        bucket,
        key: body.key,
        expires_at: expiry,
      });
    }
    if (method === "GET" && path === "/v1/fetch") {
      const target = parsed.searchParams.get("url") ?? "";
      const match = /^kotta:\/\/([^/]+)\/(.+)\?exp=(\d+)&sig=([a-z0-9]+)$/.exec(target);
      if (!match) return error(403, "BAD_SIGNATURE");
      const [, bucket, key, exp, sig] = match;
      const entry = this.signed.get(sig);
      if (!entry || entry.bucket !== bucket || entry.key !== key || String(Math.floor(entry.expiry)) !== exp) {
        return error(403, "BAD_SIGNATURE");
      }
      if (this.now >= entry.expiry) return error(403, "EXPIRED");
      const object = this.objects.find((o) => o.bucket === bucket && o.key === key);
      if (!object) return error(404, "NOT_FOUND");
      return json(200, object);
    }
    return error(404, "NOT_FOUND", path);
  };
}
