// Dashboard: precision readout, coverage by system, template history.
// Every number shown comes straight from the API; nothing is recomputed here.

import { ApiClient } from "../api";
import { escapeHtml } from "../highlight";
import type { GraphStatsView, ReviewStatsView, TemplateVersionView } from "../types";

const TEMPLATE_ID = "indicator-extraction";

export class DashboardScreen {
  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
  ) {}

  async load(): Promise<void> {
    const [review, graph, templates] = await Promise.all([
      this.client.reviewStats(),
      this.client.graphStats(),
      this.client.templateVersions(TEMPLATE_ID).catch(() => ({ versions: [] as TemplateVersionView[] })),
    ]);
    this.render(review, graph, templates.versions);
  }

  renderStats(stats: ReviewStatsView): void {
    const pending = this.root.querySelector(".stat-pending");
    const percent = this.root.querySelector(".stat-percent");
    const reviewed = this.root.querySelector(".stat-reviewed");
    if (pending) pending.textContent = String(stats.pending);
    if (percent) percent.textContent = stats.percent;
    if (reviewed) reviewed.textContent = `${stats.accepted}/${stats.reviewed}`;
  }

  render(review: ReviewStatsView, graph: GraphStatsView, versions: TemplateVersionView[]): void {
    const systems = Object.entries(graph.indicators_by_system);
    const maxCount = Math.max(1, ...systems.map(([, n]) => n));
    this.root.innerHTML = `
      <div class="stat-row">
        <div class="stat"><div class="stat-label">Pending</div><div class="stat-value stat-pending">${review.pending}</div></div>
        <div class="stat"><div class="stat-label">Precision</div><div class="stat-value stat-percent">${escapeHtml(review.percent)}</div></div>
        <div class="stat"><div class="stat-label">Accepted / reviewed</div><div class="stat-value stat-reviewed">${review.accepted}/${review.reviewed}</div></div>
        <div class="stat"><div class="stat-label">Guidelines covered</div><div class="stat-value">${graph.guidelines_covered}</div></div>
      </div>
      <h3>Indicators by physiological system</h3>
      <div class="coverage-chart">
        ${systems
          .map(
            ([system, count]) => `
          <div class="bar-row">
            <span class="bar-label">${escapeHtml(system)}</span>
            <span class="bar" style="width:${(count / maxCount) * 100}%"></span>
            <span class="bar-count">${count}</span>
          </div>`,
          )
          .join("")}
      </div>
      <h3>Prompt template history</h3>
      <ul class="template-history">
        ${versions
          .map(
            (v) =>
              `<li>v${v.version}${v.created_from ? ` <span class="muted">(from feedback ${escapeHtml(v.created_from)})</span>` : ""}</li>`,
          )
          .join("")}
      </ul>
      <form class="feedback-form">
        <h3>Prompt feedback</h3>
        <textarea name="justification" placeholder="What should the next template version fix?"></textarea>
        <button type="submit">Submit rule adjustment</button>
        <span class="feedback-result"></span>
      </form>`;
    this.root.querySelector(".feedback-form")!.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.submitFeedback();
    });
  }

  private async submitFeedback(): Promise<void> {
    const textarea = this.root.querySelector<HTMLTextAreaElement>("textarea[name=justification]")!;
    const result = this.root.querySelector(".feedback-result")!;
    if (!textarea.value.trim()) {
      result.textContent = "Feedback needs a justification.";
      return;
    }
    const revised = await this.client.submitFeedback(TEMPLATE_ID, {
      kind: "rule_adjustment",
      rule_patch: textarea.value,
      justification: textarea.value,
    });
    result.textContent = `Recorded as template v${revised.version}.`;
    await this.load();
  }
}
