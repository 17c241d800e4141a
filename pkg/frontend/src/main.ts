// DOM wiring. All data shaping lives in model.ts/render.ts; this file only
// moves strings into elements and events into API calls.

import { ApiClient, ApiError } from "./api.js";
import { savingsPercent, templateFields } from "./model.js";
import {
  renderAuditLines,
  renderJobsTable,
  renderObjectsTable,
  renderPoolChart,
  renderPoolSummary,
} from "./render.js";
import { Poller } from "./poll.js";
import type { TemplateOut } from "./types.js";

const api = new ApiClient("");

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

function toast(message: string, kind: "error" | "info" = "info"): void {
  const host = el<HTMLDivElement>("toasts");
  const node = document.createElement("div");
  node.className = `toast ${kind}`;
  node.textContent = message;
  host.appendChild(node);
  setTimeout(() => node.remove(), 6000);
}

function showLogin(visible: boolean): void {
  el("login-view").hidden = !visible;
  el("app-view").hidden = visible;
}

api.onSessionExpired = () => {
  showLogin(true);
  toast("session expired, please log in again", "error");
};

function staleBadge(id: string, stale: boolean): void {
  el(id).hidden = !stale;
}

// --- pollers (cadence <= 5 s, deduplicated per view) ---

const jobsPoller = new Poller(
  () => api.listJobs(),
  (data, state) => {
    el("jobs-table").innerHTML = renderJobsTable(data.jobs);
    staleBadge("jobs-stale", state.stale);
  },
  4000,
);

const poolPoller = new Poller(
  async () => ({ pools: await api.pools(), timeline: await api.poolTimeline("live") }),
  (data, state) => {
    el("pool-cards").innerHTML = renderPoolSummary(data.pools.pools);
    el("pool-chart").innerHTML = renderPoolChart(data.timeline.points);
    staleBadge("pool-stale", state.stale);
  },
  5000,
);

const costsPoller = new Poller(
  () => api.costs(),
  (costs, state) => {
    const savings = savingsPercent(
      costs.compute_spot_cost,
      costs.compute_on_demand_equivalent_cost,
    );
    el("cost-spot").textContent = `$${costs.compute_spot_cost.toFixed(2)}`;
    el("cost-od").textContent = `$${costs.compute_on_demand_equivalent_cost.toFixed(2)}`;
    el("cost-storage").textContent = `$${costs.storage_cost_to_date.toFixed(2)}`;
    el("cost-savings").textContent = savings === null ? "-" : `${savings.toFixed(1)}%`;
    staleBadge("costs-stale", state.stale);
  },
  5000,
);

// --- login ---

el<HTMLFormElement>("login-form").addEventListener("submit", async (event) => {
  event.preventDefault();
  const user = el<HTMLInputElement>("login-user").value.trim();
  try {
    const session = await api.login(user);
    el("session-user").textContent = session.subject;
    showLogin(false);
    jobsPoller.start();
    poolPoller.start();
    costsPoller.start();
    await loadTemplates();
    await loadBuckets();
  } catch (error) {
    toast(error instanceof ApiError ? `${error.code}: ${error.message}` : String(error), "error");
  }
});

// --- job submission from templates ---

let templates: TemplateOut[] = [];

async function loadTemplates(): Promise<void> {
  templates = (await api.listTemplates()).templates;
  const select = el<HTMLSelectElement>("template-select");
  select.innerHTML = templates
    .map((t) => `<option value="${t.name}">${t.name}</option>`)
    .join("");
  renderTemplateForm();
}

function renderTemplateForm(): void {
  const select = el<HTMLSelectElement>("template-select");
  const template = templates.find((t) => t.name === select.value);
  const host = el("template-fields");
  if (!template) {
    host.innerHTML = "";
    return;
  }
  host.innerHTML = templateFields(template)
    .filter((f) => !f.implicit)
    .map(
      (f) =>
        `<label>${f.name}<input name="${f.name}" value="${f.value}" data-param></label>`,
    )
    .join("");
}

el<HTMLSelectElement>("template-select").addEventListener("change", renderTemplateForm);

el<HTMLFormElement>("template-form").addEventListener("submit", async (event) => {
  event.preventDefault();
  const select = el<HTMLSelectElement>("template-select");
  const parameters: Record<string, string> = {};
  el("template-fields")
    .querySelectorAll<HTMLInputElement>("input[data-param]")
    .forEach((input) => {
      parameters[input.name] = input.value;
    });
  try {
    const job = await api.submitTemplate(select.value, parameters);
    toast(`submitted ${job.id} (${job.state})`);
    await jobsPoller.tick();
  } catch (error) {
    toast(error instanceof ApiError ? `${error.code}: ${error.message}` : String(error), "error");
  }
});

// --- data browser and sharing ---

async function loadBuckets(): Promise<void> {
  const { buckets } = await api.listBuckets();
  const select = el<HTMLSelectElement>("bucket-select");
  select.innerHTML = buckets.map((b) => `<option>${b}</option>`).join("");
  if (buckets.length) await loadObjects();
}

async function loadObjects(): Promise<void> {
  const bucket = el<HTMLSelectElement>("bucket-select").value;
  const { objects } = await api.listObjects(bucket);
  el("objects-table").innerHTML = renderObjectsTable(objects);
}

el<HTMLSelectElement>("bucket-select").addEventListener("change", () => void loadObjects());

el("objects-table").addEventListener("click", async (event) => {
  const target = event.target as HTMLElement;
  if (!target.classList.contains("share")) return;
  const bucket = target.dataset.bucket ?? "";
  const key = target.dataset.key ?? "";
  const ttl = Number(el<HTMLInputElement>("share-ttl").value) || 3600;
  try {
    const signed = await api.signObject(bucket, key, ttl);
    const box = el<HTMLInputElement>("share-url");
    box.value = signed.url;
    box.select();
    toast(`signed URL valid until t=${signed.expires_at}`);
  } catch (error) {
    toast(error instanceof ApiError ? `${error.code}: ${error.message}` : String(error), "error");
  }
});

// --- audit export ---

el<HTMLFormElement>("audit-form").addEventListener("submit", async (event) => {
  event.preventDefault();
  try {
    const { records } = await api.audit({
      user: el<HTMLInputElement>("audit-user").value.trim() || undefined,
      dataset: el<HTMLInputElement>("audit-dataset").value.trim() || undefined,
      service: el<HTMLInputElement>("audit-service").value.trim() || undefined,
    });
    el("audit-output").innerHTML = renderAuditLines(records);
  } catch (error) {
    toast(error instanceof ApiError ? `${error.code}: ${error.message}` : String(error), "error");
  }
});

// --- tabs ---

document.querySelectorAll<HTMLButtonElement>("nav button").forEach((button) => {
  button.addEventListener("click", () => {
    document.querySelectorAll("nav button").forEach((b) => b.classList.remove("active"));
    button.classList.add("active");
    document.querySelectorAll<HTMLElement>("main section").forEach((section) => {
      section.hidden = section.id !== `tab-${button.dataset.tab}`;
    });
  });
});

showLogin(true);
