// @vitest-environment jsdom
/**
 * Drives the UI against a real annotation service process over HTTP.
 * Generates a 10-sample corpus, starts the server, completes a full
 * session with a reload in the middle, and checks the collected scores
 * through the export endpoint.
 */

import { spawn, spawnSync, ChildProcess } from "node:child_process";
import { mkdtempSync, rmSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { AnnotationApp } from "../src/app.js";

const PORT = 8742;
const BASE = `http://127.0.0.1:${PORT}`;

const hasBackend =
  spawnSync("capeval", ["--help"], { stdio: "ignore" }).status === 0;

async function until(check: () => boolean, timeoutMs = 10000): Promise<void> {
  const start = Date.now();
  while (!check()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error("condition not met in time");
    }
    await new Promise((resolve) => setTimeout(resolve, 10));
  }
}

async function waitForServer(timeoutMs = 20000): Promise<void> {
  const start = Date.now();
  for (;;) {
    try {
      const response = await fetch(`${BASE}/api/progress`);
      if (response.ok) {
        return;
      }
    } catch {
      // not up yet
    }
    if (Date.now() - start > timeoutMs) {
      throw new Error("service did not come up");
    }
    await new Promise((resolve) => setTimeout(resolve, 200));
  }
}

describe.runIf(hasBackend)("live service session", () => {
  let workdir: string;
  let server: ChildProcess | undefined;

  beforeAll(async () => {
    workdir = mkdtempSync(join(tmpdir(), "capeval-ui-"));
    const generate = spawnSync(
      "python3",
      [
        "-c",
        "from capeval.synthetic import *; import sys; " +
          "write_synthetic_dataset(make_synthetic_dataset(n_images=2, seed=4), sys.argv[1])",
        workdir,
      ],
      { encoding: "utf-8" },
    );
    expect(generate.status, generate.stderr).toBe(0);
    server = spawn(
      "capeval",
      [
        "serve",
        "--corpus",
        join(workdir, "corpus.jsonl"),
        "--events",
        join(workdir, "events.jsonl"),
        "--port",
        String(PORT),
        "--open-phase",
        "1",
      ],
      { stdio: "ignore" },
    );
    await waitForServer();
  });

  afterAll(() => {
    server?.kill();
    rmSync(workdir, { recursive: true, force: true });
  });

  it("completes 10 items against the real API with a mid-session reload", async () => {
    const client = new ServiceClient(BASE, (input, init) => fetch(input, init));
    const root = document.createElement("div");
    document.body.appendChild(root);

    let app = new AnnotationApp(root, client, { tagger: "live", phase: 1 });
    await app.start();
    expect(app.activeItem?.total).toBe(10);
    expect(app.activeItem?.position).toBe(1);

    const clicks = [2, 5, 1, 3, 4, 2, 5, 1, 3, 4];
    const posted: Array<{ sample_id: string; score: number }> = [];
    const values = [1, 0.75, 0.5, 0.25, 0];

    for (let i = 0; i < 10; i++) {
      if (i === 5) {
        app.destroy();
        root.innerHTML = "";
        app = new AnnotationApp(root, client, { tagger: "live", phase: 1 });
        await app.start();
        expect(app.activeItem?.position).toBe(6);
      }
      const item = app.activeItem!;
      posted.push({ sample_id: item.sample_id, score: values[clicks[i] - 1] });
      const button = root.querySelector(
        `.options button[data-key="${clicks[i]}"]`,
      ) as HTMLButtonElement;
      button.click();
      await until(() => app.activeItem?.sample_id !== item.sample_id);
    }

    expect(app.activeItem).toBeNull();
    expect((root.querySelector(".done") as HTMLElement).hidden).toBe(false);

    const progress = await client.progress();
    expect(progress.accepted_events).toBe(10);
    const session = progress.sessions.find(
      (s) => s.tagger === "live" && s.phase === 1,
    );
    expect(session?.done).toBe(true);

    const exportText = await (await fetch(`${BASE}/api/export`)).text();
    const recorded = new Map<string, number>();
    for (const line of exportText.trim().split("\n")) {
      const sample = JSON.parse(line);
      for (const raw of sample.raw_scores) {
        if (raw.tagger === "live" && raw.phase === 1) {
          recorded.set(sample.sample_id, raw.score);
        }
      }
    }
    expect(recorded.size).toBe(10);
    for (const { sample_id, score } of posted) {
      expect(recorded.get(sample_id)).toBe(score);
    }

    expect(posted.map((p) => p.score)).toContain(0.75);
    expect(posted.map((p) => p.score)).toContain(0);
  });
});
