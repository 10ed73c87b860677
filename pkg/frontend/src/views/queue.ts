// Review queue screen: one pending item at a time, decisions carry the
// version the reviewer saw. A 409 becomes a visible conflict banner with a
// manual reload - decisions are never retried silently.

import { ApiClient, ConflictError } from "../api";
import { escapeHtml, highlightMentions } from "../highlight";
import type { ReviewItemView, ReviewStatsView } from "../types";

export class QueueScreen {
  private item: ReviewItemView | null = null;
  private busy = false;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
    private readonly reviewer: string,
    private readonly onStats: (stats: ReviewStatsView) => void = () => {},
  ) {}

  async load(): Promise<void> {
    const [{ item }, stats] = await Promise.all([
      this.client.reviewNext(this.reviewer),
      this.client.reviewStats(),
    ]);
    this.item = item;
    this.onStats(stats);
    await this.render();
  }

  /** Submit with the version this screen rendered; stale versions surface a banner. */
  async decide(action: "accept" | "reject" | "edit", editedTriple?: Record<string, unknown>): Promise<void> {
    if (!this.item || this.busy) return;
    this.busy = true;
    try {
      const { stats } = await this.client.submitDecision(this.item.item_id, {
        action,
        expected_version: this.item.version,
        reviewer: this.reviewer,
        edited_triple: editedTriple,
      });
      this.onStats(stats);
      await this.load();
    } catch (err) {
      if (err instanceof ConflictError) {
        this.showConflictBanner(err.message);
        return;
      }
      throw err;
    } finally {
      this.busy = false;
    }
  }

  showConflictBanner(detail: string): void {
    const banner = this.root.querySelector<HTMLElement>(".conflict-banner");
    if (!banner) return;
    banner.hidden = false;
    banner.querySelector(".conflict-detail")!.textContent =
      `Another reviewer acted on this item first (${detail}). Reload to see its current state; your decision was not applied.`;
  }

  private async sourceExcerpt(item: ReviewItemView): Promise<string> {
    const prov = item.context.provenance[0];
    if (!prov) return "<p class=\"muted\">No source chunk recorded.</p>";
    try {
      const chunk = await this.client.chunk(prov.chunk_id);
      const marked = highlightMentions(chunk.text, [
        item.context.triple.subject,
        item.context.triple.object,
      ]);
      return `
        <div class="excerpt">
          <div class="excerpt-source">${escapeHtml(chunk.title)} — ${escapeHtml(chunk.issuing_org)}
            <code>${escapeHtml(prov.chunk_id)}</code></div>
          <pre>${marked}</pre>
        </div>`;
    } catch {
      return `<p class="muted">Source chunk ${escapeHtml(prov.chunk_id)} unavailable.</p>`;
    }
  }

  async render(): Promise<void> {
    if (!this.item) {
      this.root.innerHTML = `
        <div class="conflict-banner" hidden>
          <span class="conflict-detail"></span>
          <button class="reload">Reload</button>
        </div>
        <p class="empty-queue">Queue is empty: nothing pending review.</p>`;
      this.wireBanner();
      return;
    }
    const { triple, rendered, checklist, provenance } = this.item.context;
    const excerpt = await this.sourceExcerpt(this.item);
    this.root.innerHTML = `
      <div class="conflict-banner" hidden>
        <span class="conflict-detail"></span>
        <button class="reload">Reload</button>
      </div>
      <div class="review-card" data-item-id="${escapeHtml(this.item.item_id)}" data-version="${this.item.version}">
        <div class="triple">${escapeHtml(rendered)}</div>
        <div class="badges">
          <span class="badge subject-type">${escapeHtml(triple.subject_type)}</span>
          <span class="badge relation">${escapeHtml(triple.relation)}</span>
          <span class="badge object-type">${escapeHtml(triple.object_type)}</span>
          <span class="badge provenance-count">${provenance.length} source${provenance.length === 1 ? "" : "s"}</span>
        </div>
        ${excerpt}
        <ul class="checklist">
          ${checklist.map((c) => `<li>${escapeHtml(c)}</li>`).join("")}
        </ul>
        <div class="actions">
          <button class="accept">Accept</button>
          <button class="reject">Reject</button>
          <button class="edit">Edit object…</button>
        </div>
      </div>`;
    this.wireBanner();
    this.root.querySelector(".accept")!.addEventListener("click", () => void this.decide("accept"));
    this.root.querySelector(".reject")!.addEventListener("click", () => void this.decide("reject"));
    this.root.querySelector(".edit")!.addEventListener("click", () => {
      const corrected = window.prompt("Corrected object mention:", triple.object);
      if (!corrected || corrected === triple.object) return;
      void this.decide("edit", {
        subject: triple.subject,
        subject_type: triple.subject_type,
        relation: triple.relation,
        object: corrected,
        object_type: triple.object_type,
        attributes: [],
        provenance: this.item!.context.provenance.map((p) => p.chunk_id),
      });
    });
  }

  private wireBanner(): void {
    this.root.querySelector(".reload")?.addEventListener("click", () => void this.load());
  }
}
