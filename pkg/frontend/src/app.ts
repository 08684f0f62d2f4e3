/**
 * The tagging screen: one image, one caption, five buttons. Scores go
 * straight to the service and the next item comes straight back from
 * it, so a page reload resumes exactly where the service says. One
 * request is in flight at a time; controls are disabled meanwhile.
 */

import { ApiError, isDone, PendingItem, ServiceClient } from "./api.js";
import { SCORE_OPTIONS } from "./options.js";

export interface Session {
  tagger: string;
  phase: number;
}

export class AnnotationApp {
  private current: PendingItem | null = null;
  private busy = false;
  private readonly keyHandler = (event: KeyboardEvent) => this.onKey(event);

  private readonly imageEl: HTMLImageElement;
  private readonly captionEl: HTMLElement;
  private readonly optionsEl: HTMLElement;
  private readonly progressFillEl: HTMLElement;
  private readonly progressTextEl: HTMLElement;
  private readonly bannerEl: HTMLElement;
  private readonly doneEl: HTMLElement;
  private readonly statsEl: HTMLElement;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ServiceClient,
    private readonly session: Session,
  ) {
    root.innerHTML = `
      <header>
        <span class="session">${session.tagger} / phase ${session.phase}</span>
        <div class="progress"><div class="progress-fill"></div></div>
        <span class="progress-text"></span>
      </header>
      <div class="banner" hidden></div>
      <main class="item" hidden>
        <img class="item-image" alt="image under review">
        <p class="item-caption"></p>
        <div class="options"></div>
      </main>
      <main class="done" hidden>
        <p>All items scored. Thank you.</p>
      </main>
      <aside class="stats">
        <button type="button" class="refresh-stats">Refresh progress and agreement</button>
        <pre class="stats-body"></pre>
      </aside>
    `;
    this.imageEl = root.querySelector(".item-image") as HTMLImageElement;
    this.captionEl = root.querySelector(".item-caption") as HTMLElement;
    this.optionsEl = root.querySelector(".options") as HTMLElement;
    this.progressFillEl = root.querySelector(".progress-fill") as HTMLElement;
    this.progressTextEl = root.querySelector(".progress-text") as HTMLElement;
    this.bannerEl = root.querySelector(".banner") as HTMLElement;
    this.doneEl = root.querySelector(".done") as HTMLElement;
    this.statsEl = root.querySelector(".stats-body") as HTMLElement;

    for (const option of SCORE_OPTIONS) {
      const button = document.createElement("button");
      button.type = "button";
      button.dataset.key = String(option.key);
      button.dataset.value = String(option.value);
      button.textContent = `${option.key}. ${option.label}`;
      button.addEventListener("click", () => {
        void this.submit(option.value);
      });
      this.optionsEl.appendChild(button);
    }
    const refresh = root.querySelector(".refresh-stats") as HTMLButtonElement;
    refresh.addEventListener("click", () => {
      void this.refreshStats();
    });
    root.ownerDocument.addEventListener("keydown", this.keyHandler);
  }

  /** Detach document-level listeners; the root markup stays. */
  destroy(): void {
    this.root.ownerDocument.removeEventListener("keydown", this.keyHandler);
  }

  async start(): Promise<void> {
    await this.loadNext();
  }

  get activeItem(): PendingItem | null {
    return this.current;
  }

  get isBusy(): boolean {
    return this.busy;
  }

  private onKey(event: KeyboardEvent): void {
    const index = Number(event.key) - 1;
    if (index >= 0 && index < SCORE_OPTIONS.length) {
      void this.submit(SCORE_OPTIONS[index].value);
    }
  }

  private setControlsEnabled(enabled: boolean): void {
    for (const button of this.optionsEl.querySelectorAll("button")) {
      button.disabled = !enabled;
    }
  }

  private showBanner(message: string, retry?: () => void): void {
    this.bannerEl.hidden = false;
    this.bannerEl.textContent = message;
    if (retry) {
      const button = document.createElement("button");
      button.type = "button";
      button.className = "retry";
      button.textContent = "Retry";
      button.addEventListener("click", () => {
        this.clearBanner();
        retry();
      });
      this.bannerEl.appendChild(button);
    }
  }

  private clearBanner(): void {
    this.bannerEl.hidden = true;
    this.bannerEl.textContent = "";
  }

  private renderProgress(position: number, total: number): void {
    const fraction = total > 0 ? position / total : 0;
    this.progressFillEl.style.width = `${Math.round(fraction * 100)}%`;
    this.progressTextEl.textContent = `${position} / ${total}`;
  }

  private renderItem(item: PendingItem): void {
    this.current = item;
    this.doneEl.hidden = true;
    const main = this.root.querySelector(".item") as HTMLElement;
    main.hidden = false;
    this.imageEl.src = item.image;
    this.captionEl.textContent = item.candidate;
    this.renderProgress(item.position - 1, item.total);
    this.setControlsEnabled(true);
  }

  private renderDone(total: number): void {
    this.current = null;
    (this.root.querySelector(".item") as HTMLElement).hidden = true;
    this.doneEl.hidden = false;
    this.renderProgress(total, total);
    void this.refreshStats();
  }

  private async loadNext(): Promise<void> {
    this.busy = true;
    this.setControlsEnabled(false);
    try {
      const item = await this.client.next(this.session.tagger, this.session.phase);
      if (isDone(item)) {
        this.renderDone(item.total);
      } else {
        this.renderItem(item);
      }
    } catch (error) {
      this.showBanner(`Cannot reach the service: ${String(error)}`, () => {
        void this.loadNext();
      });
    } finally {
      this.busy = false;
    }
  }

  private async submit(value: number): Promise<void> {
    if (this.busy || this.current === null) {
      return;
    }
    this.busy = true;
    this.setControlsEnabled(false);
    this.clearBanner();
    try {
      await this.client.submitScore(
        this.current.sample_id,
        this.session.tagger,
        this.session.phase,
        value,
      );
    } catch (error) {
      if (error instanceof ApiError && error.status === 409) {
        this.showBanner("Item was already scored; moving on.");
      } else {
        this.showBanner(`Submission failed: ${String(error)}`, () => {
          void this.submit(value);
        });
        this.busy = false;
        this.setControlsEnabled(true);
        return;
      }
    }
    this.busy = false;
    await this.loadNext();
  }

  /** Read-only operator panel; failures here never block tagging. */
  async refreshStats(): Promise<void> {
    try {
      const [progress, agreement] = [
        await this.client.progress(),
        await this.client.agreement(),
      ];
      const lines: string[] = [];
      lines.push(`events: ${progress.accepted_events} / open phases: ${progress.open_phases.join(", ")}`);
      for (const s of progress.sessions) {
        lines.push(`${s.tagger} phase ${s.phase}: ${s.scored}/${s.total}${s.done ? " done" : ""}`);
      }
      const overallAlpha = agreement.overall["alpha"];
      lines.push(
        `agreement (${agreement.level}) overall alpha: ${formatStat(overallAlpha)}`,
      );
      for (const [tagger, cell] of Object.entries(agreement.per_tagger)) {
        lines.push(
          `  ${tagger}: alpha ${formatStat(cell["alpha"])} tau ${formatStat(cell["tau"])}`,
        );
      }
      this.statsEl.textContent = lines.join("\n");
    } catch (error) {
      this.statsEl.textContent = `stats unavailable: ${String(error)}`;
    }
  }
}

function formatStat(value: unknown): string {
  return typeof value === "number" ? value.toFixed(3) : "n/a";
}
