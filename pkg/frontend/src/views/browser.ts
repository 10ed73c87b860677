// Graph browser: entity search, 1-2 hop neighborhood, provenance drill-down
// to the source chunk text. Strictly read-only.

import { ApiClient, NotFoundError } from "../api";
import { escapeHtml } from "../highlight";
import type { EdgeView, NeighborhoodView, NodeView } from "../types";

export class BrowserScreen {
  private hops: 1 | 2 = 1;
  private current: NodeView | null = null;

  constructor(
    private readonly root: HTMLElement,
    private readonly client: ApiClient,
  ) {}

  render(): void {
    this.root.innerHTML = `
      <form class="search-form">
        <input name="q" type="search" placeholder="Search entities (e.g. HDL, Gout)…" />
        <select name="hops"><option value="1">1 hop</option><option value="2">2 hops</option></select>
        <button type="submit">Search</button>
      </form>
      <div class="search-results"></div>
      <div class="neighborhood"></div>
      <div class="chunk-panel" hidden></div>`;
    this.root.querySelector(".search-form")!.addEventListener("submit", (ev) => {
      ev.preventDefault();
      void this.search();
    });
  }

  private async search(): Promise<void> {
    const q = this.root.querySelector<HTMLInputElement>("input[name=q]")!.value.trim();
    this.hops = this.root.querySelector<HTMLSelectElement>("select[name=hops]")!.value === "2" ? 2 : 1;
    const results = this.root.querySelector<HTMLElement>(".search-results")!;
    const { nodes } = await this.client.searchNodes(q);
    if (nodes.length === 0) {
      results.innerHTML = `<p class="empty-state">No entities match “${escapeHtml(q)}”.</p>`;
      this.root.querySelector<HTMLElement>(".neighborhood")!.innerHTML = "";
      return;
    }
    results.innerHTML = `<ul class="node-list">${nodes
      .map(
        (n) => `
        <li><a href="#" data-entity="${escapeHtml(n.entity_id)}">${escapeHtml(n.label)}</a>
          <span class="badge">${escapeHtml(n.entity_type)}</span>
          ${n.system_tag ? `<span class="badge system">${escapeHtml(n.system_tag)}</span>` : ""}</li>`,
      )
      .join("")}</ul>`;
    for (const link of results.querySelectorAll<HTMLAnchorElement>("a[data-entity]")) {
      link.addEventListener("click", (ev) => {
        ev.preventDefault();
        void this.showNeighborhood(link.dataset.entity!);
      });
    }
  }

  async showNeighborhood(entityId: string): Promise<void> {
    const panel = this.root.querySelector<HTMLElement>(".neighborhood")!;
    let node: NodeView;
    let hood: NeighborhoodView;
    try {
      node = await this.client.node(entityId);
      hood = await this.client.neighborhood(entityId, this.hops);
    } catch (err) {
      if (err instanceof NotFoundError) {
        panel.innerHTML = `<p class="empty-state">Entity not found.</p>`;
        return;
      }
      throw err;
    }
    this.current = node;
    const labelOf = (id: string) => hood.nodes.find((n) => n.entity_id === id)?.label ?? id;
    const attrs = Object.entries(node.attributes);
    panel.innerHTML = `
      <h3>${escapeHtml(node.label)} <span class="badge">${escapeHtml(node.entity_type)}</span></h3>
      ${
        attrs.length
          ? `<dl class="attributes">${attrs
              .map(
                ([name, av]) => `
              <dt>${escapeHtml(name)}</dt>
              <dd>${escapeHtml(av.value)}${
                av.provenance.length
                  ? ` <a href="#" class="prov-link" data-chunk="${escapeHtml(av.provenance[0]!.chunk_id)}">source</a>`
                  : ""
              }</dd>`,
              )
              .join("")}</dl>`
          : ""
      }
      <table class="edge-table">
        <thead><tr><th>Subject</th><th>Relation</th><th>Object</th><th>Status</th><th>Provenance</th></tr></thead>
        <tbody>
          ${hood.edges
            .map(
              (e: EdgeView) => `
            <tr>
              <td>${escapeHtml(labelOf(e.subject))}</td>
              <td><code>${escapeHtml(e.relation)}</code></td>
              <td>${escapeHtml(labelOf(e.object))}</td>
              <td>${escapeHtml(e.status)}</td>
              <td>${
                e.provenance.length
                  ? `<a href="#" class="prov-link" data-chunk="${escapeHtml(e.provenance[0]!.chunk_id)}">${escapeHtml(
                      e.provenance[0]!.chunk_id,
                    )}</a>`
                  : "—"
              }</td>
            </tr>`,
            )
            .join("")}
        </tbody>
      </table>`;
    for (const link of panel.querySelectorAll<HTMLAnchorElement>("a.prov-link")) {
      link.addEventListener("click", (ev) => {
        ev.preventDefault();
        void this.showChunk(link.dataset.chunk!);
      });
    }
  }

  async showChunk(chunkId: string): Promise<void> {
    const panel = this.root.querySelector<HTMLElement>(".chunk-panel")!;
    const chunk = await this.client.chunk(chunkId);
    panel.hidden = false;
    panel.innerHTML = `
      <h4>${escapeHtml(chunk.title)} <span class="muted">(${escapeHtml(chunk.issuing_org)})</span></h4>
      <div class="muted">${chunk.section_path.map(escapeHtml).join(" › ")} — <code>${escapeHtml(chunk.chunk_id)}</code></div>
      <pre>${escapeHtml(chunk.text)}</pre>`;
  }
}
