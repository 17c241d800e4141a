// Payload shapes returned by the /v1 gateway.

export interface TokenOut {
  token: string;
  subject: string;
  roles: string[];
  expires_at: number;
}

export interface JobOut {
  id: string;
  owner: string;
  queue: string;
  state: string;
  requeues: number;
  submit_time: number;
  claim_time: number | null;
  stage_done_time: number | null;
  end_time: number | null;
  assigned_instance: string | null;
  exit_code: number | null;
  failure: string | null;
  markers: MarkerOut[];
}

export interface MarkerOut {
  time: number;
  cpu_util: number;
  ram_util: number;
  io_util: number;
  progress: string;
}

export interface JobListOut {
  jobs: JobOut[];
  next_cursor: string | null;
}

export interface JobSubmit {
  owner: string;
  queue: string;
  inputs: string[];
  script: string;
  outputs: string[];
  max_walltime_secs: number;
}

export interface TemplateOut {
  name: string;
  description: JobSubmit;
  defaults: Record<string, string>;
  parameters: string[];
}

export interface ObjectOut {
  bucket: string;
  key: string;
  size_gb: number;
  tier: string;
  owner: string;
  created_at: number;
  last_access: number;
  encrypted_at_rest: boolean;
}

export interface SignedUrlOut {
  url: string;
  bucket: string;
  key: string;
  expires_at: number;
}

export interface InstanceOut {
  id: string;
  type_name: string;
  zone: string;
  market: string;
  state: string;
  busy: boolean;
}

export interface PoolOut {
  queue_class: string;
  strategy: string;
  provisioned: number;
  idle: number;
  pending_jobs: number;
  active_jobs: number;
  instances: InstanceOut[];
}

export interface PoolsOut {
  now: number;
  pools: PoolOut[];
}

export interface TimelinePoint {
  t: number;
  provisioned: number;
  idle: number;
  pending: number;
  active: number;
}

export interface CostsOut {
  now: number;
  compute_spot_cost: number;
  compute_on_demand_equivalent_cost: number;
  storage_cost_to_date: number;
  billed_instance_hours: number;
}

export interface AuditRecordOut {
  seq: number;
  time: number;
  iso_time: string;
  actor: string;
  action: string;
  resource: string;
  outcome: string;
}
