"""Command line client for the REST gateway.

Every subcommand maps onto one gateway endpoint; the CLI holds no platform
state beyond the saved token. Exit code 0 on success, 1 with a
machine-parsable ``CODE: message`` line on stderr otherwise.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

import httpx

from .config import load_config

DEFAULT_ENDPOINT = "http://127.0.0.1:8000"
DEFAULT_TOKEN_FILE = "~/.enclave/token"


def _fail(code: str, message: str, output: str) -> int:
    if output == "json":
        print(json.dumps({"error": {"code": code, "message": message}}), file=sys.stderr)
    else:
        print(f"{code}: {message}", file=sys.stderr)
    return 1


class Client:
    def __init__(self, endpoint: str, token_file: str, output: str, transport=None):
        self.endpoint = endpoint.rstrip("/")
        self.token_file = Path(os.path.expanduser(token_file))
        self.output = output
        self.http = httpx.Client(base_url=self.endpoint, transport=transport, timeout=120.0)

    def token(self) -> Optional[str]:
        env = os.environ.get("ENCLAVE_TOKEN")
        if env:
            return env
        if self.token_file.exists():
            return self.token_file.read_text().strip()
        return None

    def save_token(self, token: str) -> None:
        self.token_file.parent.mkdir(parents=True, exist_ok=True)
        self.token_file.write_text(token + "\n")

    def request(self, method: str, path: str, *, json_body=None, params=None, auth=True):
        headers = {}
        if auth:
            token = self.token()
            if token:
                headers["Authorization"] = f"Bearer {token}"
        response = self.http.request(method, path, json=json_body, params=params, headers=headers)
        if response.status_code >= 400:
            try:
                error = response.json()["error"]
                raise CliError(error["code"], error["message"])
            except (KeyError, ValueError):
                raise CliError(f"HTTP_{response.status_code}", response.text[:200])
        return response.json()

    def emit(self, data, text_renderer=None) -> None:
        if self.output == "json" or text_renderer is None:
            print(json.dumps(data, indent=2))
        else:
            text_renderer(data)


class CliError(Exception):
    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


# --- subcommand handlers ---


def cmd_login(client: Client, args) -> None:
    data = client.request("POST", "/v1/auth/login", json_body={"user_id": args.user}, auth=False)
    client.save_token(data["token"])
    client.emit(data, lambda d: print(f"logged in as {d['subject']}, token expires at {d['expires_at']}"))


def cmd_ls(client: Client, args) -> None:
    if not args.path:
        data = client.request("GET", "/v1/buckets")
        client.emit(data, lambda d: print("\n".join(d["buckets"])))
        return
    bucket, _, prefix = args.path.partition("/")
    params = {"prefix": prefix} if prefix else {}
    if args.cursor:
        params["cursor"] = args.cursor
    data = client.request("GET", f"/v1/objects/{bucket}", params=params)

    def render(d):
        for obj in d["objects"]:
            print(f"{obj['size_gb']:8.2f}GB  {obj['tier']:10s}  {obj['bucket']}/{obj['key']}")
        if d.get("next_cursor"):
            print(f"# more: --cursor {d['next_cursor']}")

    client.emit(data, render)


def cmd_put(client: Client, args) -> None:
    data = client.request(
        "POST", f"/v1/objects/{args.bucket}/{args.key}", json_body={"size_gb": args.size_gb}
    )
    client.emit(data, lambda d: print(f"stored {d['bucket']}/{d['key']} ({d['size_gb']} GB, tier {d['tier']})"))


def cmd_get(client: Client, args) -> None:
    data = client.request("GET", f"/v1/objects/{args.bucket}/{args.key}")
    client.emit(
        data,
        lambda d: print(
            f"{d['bucket']}/{d['key']}: {d['size_gb']} GB, tier {d['tier']}, owner {d['owner']}, "
            f"last access {d['last_access']}"
        ),
    )


def cmd_sign(client: Client, args) -> None:
    data = client.request(
        "POST", f"/v1/sign/{args.bucket}", json_body={"key": args.key, "ttl_seconds": args.ttl}
    )
    client.emit(data, lambda d: print(d["url"]))


def cmd_fetch(client: Client, args) -> None:
    data = client.request("GET", "/v1/fetch", params={"url": args.url}, auth=False)
    client.emit(
        data,
        lambda d: print(f"{d['bucket']}/{d['key']}: {d['size_gb']} GB, tier {d['tier']}"),
    )


def cmd_submit(client: Client, args) -> None:
    try:
        payload = json.loads(Path(args.job_file).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CliError("INVALID_DESCRIPTION", f"cannot read job file: {exc}")
    data = client.request("POST", "/v1/jobs", json_body=payload)
    client.emit(data, lambda d: print(d["id"]))


def cmd_status(client: Client, args) -> None:
    data = client.request("GET", f"/v1/jobs/{args.job_id}")

    def render(d):
        line = f"{d['id']}  {d['state']}  queue={d['queue']} requeues={d['requeues']}"
        if d.get("exit_code") is not None:
            line += f" exit={d['exit_code']}"
        if d.get("failure"):
            line += f" failure={d['failure']}"
        print(line)

    client.emit(data, render)


def cmd_logs(client: Client, args) -> None:
    data = client.request("GET", f"/v1/jobs/{args.job_id}")

    def render(d):
        for marker in d["markers"]:
            print(
                f"t={marker['time']:10.1f}  cpu={marker['cpu_util']:.2f} ram={marker['ram_util']:.2f} "
                f"io={marker['io_util']:.2f}  {marker['progress']}"
            )
        if not d["markers"]:
            print(f"# no status markers for {d['id']} ({d['state']})")

    client.emit(data, render)


def cmd_audit(client: Client, args) -> None:
    params = {
        k: v
        for k, v in (
            ("user", args.user),
            ("dataset", args.dataset),
            ("service", args.service),
            ("start", args.start),
            ("end", args.end),
        )
        if v is not None
    }
    data = client.request("GET", "/v1/audit", params=params)

    def render(d):
        for r in d["records"]:
            print(f"{r['seq']}|{r['iso_time']}|{r['actor']}|{r['action']}|{r['resource']}|{r['outcome']}")

    client.emit(data, render)


def cmd_experiment_run(client: Client, args) -> None:
    config = load_config(args.config)
    data = client.request("POST", "/v1/experiments/run", json_body=config)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    json_path = out_dir / f"{data['name']}.json"
    json_path.write_text(json.dumps(data["data"], indent=2) + "\n")
    csv_path = out_dir / f"{data['name']}.csv"
    lines = [",".join(str(h) for h in data["summary_header"])]
    lines += [",".join(str(v) for v in row) for row in data["summary_rows"]]
    csv_path.write_text("\n".join(lines) + "\n")
    client.emit(
        {"written": [str(json_path), str(csv_path)]},
        lambda d: print("\n".join(d["written"])),
    )


def cmd_tick(client: Client, args) -> None:
    data = client.request("POST", "/v1/admin/tick", json_body={"ticks": args.ticks})
    client.emit(
        data,
        lambda d: print(
            f"now={d['iso_now']} pending={d['pending_jobs']} active={d['active_jobs']}"
        ),
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="enclave", description=__doc__)
    parser.add_argument(
        "--endpoint",
        default=os.environ.get("ENCLAVE_ENDPOINT", DEFAULT_ENDPOINT),
        help="gateway base URL (env ENCLAVE_ENDPOINT)",
    )
    parser.add_argument(
        "--token-file",
        default=os.environ.get("ENCLAVE_TOKEN_FILE", DEFAULT_TOKEN_FILE),
        help="where the login token is stored (env ENCLAVE_TOKEN_FILE)",
    )
    parser.add_argument(
        "--output",
        choices=("json", "text"),
        default=os.environ.get("ENCLAVE_OUTPUT", "text"),
        help="output format (env ENCLAVE_OUTPUT)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("login", help="authenticate and store the token")
    p.add_argument("user")
    p.set_defaults(func=cmd_login)

    p = sub.add_parser("ls", help="list buckets, or objects under bucket[/prefix]")
    p.add_argument("path", nargs="?", default="")
    p.add_argument("--cursor")
    p.set_defaults(func=cmd_ls)

    p = sub.add_parser("put", help="upload an object (metadata)")
    p.add_argument("bucket")
    p.add_argument("key")
    p.add_argument("size_gb", type=float)
    p.set_defaults(func=cmd_put)

    p = sub.add_parser("get", help="show an object")
    p.add_argument("bucket")
    p.add_argument("key")
    p.set_defaults(func=cmd_get)

    p = sub.add_parser("sign", help="mint a short-term anonymous URL")
    p.add_argument("bucket")
    p.add_argument("key")
    p.add_argument("--ttl", type=float, default=3600.0)
    p.set_defaults(func=cmd_sign)

    p = sub.add_parser("fetch", help="fetch an object anonymously via a signed URL")
    p.add_argument("url")
    p.set_defaults(func=cmd_fetch)

    p = sub.add_parser("submit", help="submit a job from a JSON description")
    p.add_argument("job_file")
    p.set_defaults(func=cmd_submit)

    p = sub.add_parser("status", help="show job state")
    p.add_argument("job_id")
    p.set_defaults(func=cmd_status)

    p = sub.add_parser("logs", help="show job status markers")
    p.add_argument("job_id")
    p.set_defaults(func=cmd_logs)

    p = sub.add_parser("audit", help="export the audit log (admin)")
    p.add_argument("--user")
    p.add_argument("--dataset")
    p.add_argument("--service")
    p.add_argument("--start", type=float)
    p.add_argument("--end", type=float)
    p.set_defaults(func=cmd_audit)

    p_exp = sub.add_parser("experiment", help="experiment operations")
    exp_sub = p_exp.add_subparsers(dest="experiment_command", required=True)
    p = exp_sub.add_parser("run", help="run an experiment from a config file")
    p.add_argument("config")
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_experiment_run)

    p = sub.add_parser("tick", help="advance simulated time (admin)")
    p.add_argument("ticks", nargs="?", type=int, default=1)
    p.set_defaults(func=cmd_tick)

    return parser


def main(argv=None, transport=None) -> int:
    args = build_parser().parse_args(argv)
    client = Client(args.endpoint, args.token_file, args.output, transport=transport)
    try:
        args.func(client, args)
        return 0
    except CliError as exc:
        return _fail(exc.code, str(exc), args.output)
    except httpx.HTTPError as exc:
        return _fail("CONNECTION_ERROR", str(exc), args.output)
    except Exception as exc:  # config parse errors from `experiment run`
        code = getattr(exc, "code", "ERROR")
        return _fail(code, str(exc), args.output)


if __name__ == "__main__":
    sys.exit(main())
