/** Global test fixture: builds the 40/20 review corpus via the python
 * fixture script, then starts a real service instance (uvicorn via the
 * `conceptray serve` CLI) in truth-score mode. Tests consume the primary
 * component only through its HTTP interface. */

import { ChildProcess, execFileSync, spawn } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";

const HERE = dirname(fileURLToPath(import.meta.url));

let server: ChildProcess | null = null;
let fixtureDir = "";

async function waitForService(baseUrl: string, timeoutMs = 30_000): Promise<void> {
  const deadline = Date.now() + timeoutMs;
  for (;;) {
    try {
      const resp = await fetch(`${baseUrl}/cases?page_size=1`);
      if (resp.ok) return;
    } catch {
      // not up yet
    }
    if (Date.now() > deadline) throw new Error(`service at ${baseUrl} never came up`);
    await new Promise((resolve) => setTimeout(resolve, 500));
  }
}

export async function setup(): Promise<void> {
  fixtureDir = mkdtempSync(join(tmpdir(), "review-console-"));
  const script = join(HERE, "..", "scripts", "make_fixture.py");
  const out = execFileSync("python3", [script, fixtureDir], { encoding: "utf-8" });
  const artifacts = JSON.parse(out.trim().split("\n").pop()!);

  const port = 8900 + (process.pid % 500);
  const baseUrl = `http://127.0.0.1:${port}`;
  server = spawn(
    "conceptray",
    [
      "serve",
      "--manifest",
      artifacts.manifest,
      "--head",
      artifacts.head,
      "--concept-source",
      "truth",
      "--truth",
      artifacts.truth,
      "--score-log",
      join(fixtureDir, "scores.jsonl"),
      "--port",
      String(port),
    ],
    { stdio: ["ignore", "inherit", "inherit"] },
  );
  await waitForService(baseUrl);
  process.env.REVIEW_TEST_BASE = baseUrl;
  process.env.REVIEW_TEST_DIR = fixtureDir;
}

export async function teardown(): Promise<void> {
  if (server) server.kill("SIGTERM");
  if (fixtureDir) rmSync(fixtureDir, { recursive: true, force: true });
}
