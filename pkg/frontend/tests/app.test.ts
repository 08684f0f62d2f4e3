// @vitest-environment jsdom
import { beforeEach, describe, expect, it } from "vitest";

import { ServiceClient } from "../src/api.js";
import { AnnotationApp } from "../src/app.js";
import { SCORE_OPTIONS } from "../src/options.js";
import { FakeService, makeSamples } from "./fake.js";

async function until(check: () => boolean, timeoutMs = 5000): Promise<void> {
  const start = Date.now();
  while (!check()) {
    if (Date.now() - start > timeoutMs) {
      throw new Error("condition not met in time");
    }
    await new Promise((resolve) => setTimeout(resolve, 5));
  }
}

function clickOption(root: HTMLElement, key: number): void {
  const button = root.querySelector(
    `.options button[data-key="${key}"]`,
  ) as HTMLButtonElement;
  button.click();
}

function mount(service: FakeService, tagger = "t1", phase = 1) {
  const root = document.createElement("div");
  document.body.appendChild(root);
  const client = new ServiceClient("http://svc", service.fetch);
  const app = new AnnotationApp(root, client, { tagger, phase });
  return { root, app };
}

beforeEach(() => {
  document.body.innerHTML = "";
});

describe("option wiring", () => {
  it("renders the five buttons in scale order", async () => {
    const service = new FakeService(makeSamples(3));
    const { root, app } = mount(service);
    await app.start();
    const buttons = [...root.querySelectorAll(".options button")];
    expect(buttons).toHaveLength(5);
    expect(buttons.map((b) => (b as HTMLElement).dataset.value)).toEqual([
      "1",
      "0.75",
      "0.5",
      "0.25",
      "0",
    ]);
    expect(SCORE_OPTIONS.map((o) => o.value)).toEqual([1, 0.75, 0.5, 0.25, 0]);
  });

  it("option 2 posts 0.75", async () => {
    const service = new FakeService(makeSamples(3));
    const { root, app } = mount(service);
    await app.start();
    const first = app.activeItem!.sample_id;
    clickOption(root, 2);
    await until(() => service.attempts.length === 1);
    expect(service.attempts[0]).toEqual({
      sample_id: first,
      tagger: "t1",
      phase: 1,
      score: 0.75,
    });
  });

  it("option 5 posts 0", async () => {
    const service = new FakeService(makeSamples(3));
    const { root, app } = mount(service);
    await app.start();
    clickOption(root, 5);
    await until(() => service.attempts.length === 1);
    expect(service.attempts[0].score).toBe(0);
  });

  it("keyboard keys 1-5 map to the options", async () => {
    const service = new FakeService(makeSamples(6));
    const { app } = mount(service);
    await app.start();
    for (const [key, value] of [
      ["1", 1],
      ["2", 0.75],
      ["3", 0.5],
      ["4", 0.25],
      ["5", 0],
    ] as const) {
      const before = service.attempts.length;
      document.dispatchEvent(new KeyboardEvent("keydown", { key }));
      await until(() => service.attempts.length === before + 1);
      expect(service.attempts[before].score).toBe(value);
    }
  });

  it("a double click submits once", async () => {
    const service = new FakeService(makeSamples(2));
    const { root, app } = mount(service);
    await app.start();
    const first = app.activeItem!.sample_id;
    clickOption(root, 1);
    clickOption(root, 1);
    await until(() => app.activeItem?.sample_id !== first);
    expect(
      service.attempts.filter((a) => a.sample_id === first),
    ).toHaveLength(1);
  });
});

describe("scripted session", () => {
  it("completes 10 items with a reload in the middle", async () => {
    const service = new FakeService(makeSamples(10));
    const expected = service.order("t1", 1).map((s) => s.sample_id);

    const { root, app } = mount(service);
    await app.start();
    const plan = [2, 5, 1, 3, 4];
    for (const key of plan) {
      const item = app.activeItem!.sample_id;
      clickOption(root, key);
      await until(() => app.activeItem?.sample_id !== item);
    }
    expect(service.events.size).toBe(5);

    // Reload: fresh DOM and app instance, same service.
    app.destroy();
    root.remove();
    const second = mount(service);
    await second.app.start();
    expect(second.app.activeItem?.sample_id).toBe(expected[5]);
    expect(second.app.activeItem?.position).toBe(6);
    expect(
      second.root.querySelector(".progress-text")?.textContent,
    ).toBe("5 / 10");

    for (const key of [5, 2, 1, 4, 3]) {
      const item = second.app.activeItem?.sample_id ?? null;
      clickOption(second.root, key);
      await until(() => second.app.activeItem?.sample_id !== item);
    }

    expect(service.events.size).toBe(10);
    expect(second.app.activeItem).toBeNull();
    const done = second.root.querySelector(".done") as HTMLElement;
    expect(done.hidden).toBe(false);
    expect(
      second.root.querySelector(".progress-text")?.textContent,
    ).toBe("10 / 10");
    expect(
      (second.root.querySelector(".progress-fill") as HTMLElement).style.width,
    ).toBe("100%");

    expect([...service.events.keys()].map((k) => k.split("|")[0]).sort()).toEqual(
      [...expected].sort(),
    );
    const valueFor = (key: number) =>
      SCORE_OPTIONS.find((o) => o.key === key)!.value;
    const planned = [...plan, 5, 2, 1, 4, 3].map(valueFor);
    expected.forEach((sampleId, i) => {
      expect(service.events.get(`${sampleId}|t1|1`)).toBe(planned[i]);
    });
  });

  it("serves items in the session order the service dictates", async () => {
    const service = new FakeService(makeSamples(4));
    const expected = service.order("t1", 1).map((s) => s.sample_id);
    const { root, app } = mount(service);
    await app.start();
    const seen: string[] = [];
    while (app.activeItem !== null) {
      seen.push(app.activeItem.sample_id);
      const current = app.activeItem.sample_id;
      clickOption(root, 3);
      await until(() => app.activeItem?.sample_id !== current);
    }
    expect(seen).toEqual(expected);
  });
});

describe("failure handling", () => {
  it("shows a banner with retry when the service is unreachable", async () => {
    const service = new FakeService(makeSamples(2));
    service.failNext = 1;
    const { root, app } = mount(service);
    await app.start();
    const banner = root.querySelector(".banner") as HTMLElement;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain("Cannot reach the service");
    (banner.querySelector(".retry") as HTMLButtonElement).click();
    await until(() => app.activeItem !== null);
    expect(banner.hidden).toBe(true);
  });

  it("keeps the item and offers retry when a submission fails", async () => {
    const service = new FakeService(makeSamples(2));
    const { root, app } = mount(service);
    await app.start();
    const first = app.activeItem!.sample_id;
    service.failNext = 1;
    clickOption(root, 1);
    await until(
      () => !(root.querySelector(".banner") as HTMLElement).hidden,
    );
    expect(app.activeItem?.sample_id).toBe(first);
    const banner = root.querySelector(".banner") as HTMLElement;
    expect(banner.textContent).toContain("Submission failed");
    (banner.querySelector(".retry") as HTMLButtonElement).click();
    await until(() => app.activeItem?.sample_id !== first);
    expect(service.events.get(`${first}|t1|1`)).toBe(1);
  });

  it("skips forward with a warning on a duplicate submission", async () => {
    const service = new FakeService(makeSamples(3));
    const { root, app } = mount(service);
    await app.start();
    const first = app.activeItem!.sample_id;
    // Another client scores the same item while it is on screen.
    service.scoreDirectly(first, "t1", 1, 1.0);
    clickOption(root, 4);
    await until(() => app.activeItem?.sample_id !== first);
    const banner = root.querySelector(".banner") as HTMLElement;
    expect(banner.textContent).toContain("already scored");
    expect(service.events.get(`${first}|t1|1`)).toBe(1.0);
    expect(app.activeItem).not.toBeNull();
  });
});

describe("operator panel", () => {
  it("renders progress and agreement on refresh", async () => {
    const service = new FakeService(makeSamples(2));
    const { root, app } = mount(service);
    await app.start();
    await app.refreshStats();
    const stats = root.querySelector(".stats-body") as HTMLElement;
    expect(stats.textContent).toContain("events: 0");
    expect(stats.textContent).toContain("overall alpha: 0.750");
    expect(stats.textContent).toContain("t1: alpha 0.800 tau 0.700");
  });
});
