// Queue screen: render, accept flow, and the conflict banner on stale versions.

import { beforeEach, describe, expect, it, vi } from "vitest";

import type { ApiClient } from "../src/api";
import { ConflictError } from "../src/api";
import { QueueScreen } from "../src/views/queue";
import type { ReviewItemView, ReviewStatsView } from "../src/types";

function item(version = 1): ReviewItemView {
  return {
    item_id: "ri-e1",
    edge_id: "e1",
    status: "pending",
    version,
    context: {
      triple: {
        subject: "High-density lipoprotein",
        subject_type: "ClinicalIndicator",
        relation: "indicates_risk_of",
        object: "Coronary heart disease",
        object_type: "Disease",
      },
      rendered: "High-density lipoprotein —indicates_risk_of→ Coronary heart disease",
      provenance: [
        { doc_id: "d1", chunk_id: "d1:0001", template_id: "t", template_version: 1, provider: "mock" },
      ],
      checklist: ["c1", "c2", "c3", "c4"],
    },
  };
}

function stats(pending: number, accepted: number, reviewed: number): ReviewStatsView {
  return {
    pending,
    accepted,
    reviewed,
    precision: reviewed ? { numerator: accepted, denominator: reviewed, value: accepted / reviewed } : null,
    percent: reviewed ? `${Math.round((accepted / reviewed) * 100)}%` : "n/a",
  };
}

function stubClient(overrides: Partial<Record<keyof ApiClient, unknown>> = {}): ApiClient {
  // stateful like the real service: a decision changes what reviewStats returns
  let current = stats(5, 0, 0);
  return {
    reviewNext: vi.fn(async () => ({ item: item() })),
    reviewStats: vi.fn(async () => current),
    chunk: vi.fn(async () => ({
      chunk_id: "d1:0001",
      doc_id: "d1",
      text: "Low High-density lipoprotein directly indicates Coronary heart disease.",
      section_path: ["Lipoproteins"],
      issuing_org: "European Society of Cardiology",
      title: "Lipoprotein guide",
    })),
    submitDecision: vi.fn(async () => {
      current = stats(4, 1, 1);
      return { item: { ...item(), status: "accepted" }, stats: current };
    }),
    ...overrides,
  } as unknown as ApiClient;
}

describe("QueueScreen", () => {
  let root: HTMLElement;

  beforeEach(() => {
    document.body.innerHTML = '<div id="root"></div>';
    root = document.getElementById("root")!;
  });

  it("renders the pending item with badges, excerpt highlights, and checklist", async () => {
    const screen = new QueueScreen(root, stubClient(), "dr-a");
    await screen.load();
    expect(root.querySelector(".triple")!.textContent).toContain("High-density lipoprotein");
    expect(root.querySelector(".badge.relation")!.textContent).toBe("indicates_risk_of");
    expect(root.querySelectorAll(".checklist li")).toHaveLength(4);
    expect(root.querySelectorAll(".excerpt mark").length).toBeGreaterThan(0);
    expect(root.querySelector<HTMLElement>(".conflict-banner")!.hidden).toBe(true);
  });

  it("accept submits the rendered version and reports fresh stats", async () => {
    const client = stubClient();
    const seen: ReviewStatsView[] = [];
    const screen = new QueueScreen(root, client, "dr-a", (s) => seen.push(s));
    await screen.load();
    await screen.decide("accept");
    expect(client.submitDecision).toHaveBeenCalledExactlyOnceWith("ri-e1", {
      action: "accept",
      expected_version: 1,
      reviewer: "dr-a",
      edited_triple: undefined,
    });
    // initial stats (pending 5), then the decision response stats (pending 4)
    expect(seen.at(-1)!.pending).toBe(4);
    expect(seen.at(-1)!.percent).toBe("100%");
  });

  it("a stale decision shows the conflict banner and never retries", async () => {
    const submit = vi.fn(async () => {
      throw new ConflictError("version mismatch on ri-e1: expected 1, current 2");
    });
    const client = stubClient({ submitDecision: submit });
    const screen = new QueueScreen(root, client, "dr-a");
    await screen.load();
    await screen.decide("reject");
    const banner = root.querySelector<HTMLElement>(".conflict-banner")!;
    expect(banner.hidden).toBe(false);
    expect(banner.textContent).toContain("Another reviewer acted on this item first");
    expect(banner.textContent).toContain("your decision was not applied");
    expect(submit).toHaveBeenCalledTimes(1);
  });

  it("the banner reload refetches the current item state", async () => {
    const client = stubClient({
      submitDecision: vi.fn(async () => {
        throw new ConflictError("stale");
      }),
    });
    const screen = new QueueScreen(root, client, "dr-a");
    await screen.load();
    await screen.decide("accept");
    expect(client.reviewNext).toHaveBeenCalledTimes(1);
    (root.querySelector(".conflict-banner .reload") as HTMLButtonElement).click();
    await vi.waitFor(() => expect(client.reviewNext).toHaveBeenCalledTimes(2));
  });

  it("shows the empty state when the queue drains", async () => {
    const client = stubClient({ reviewNext: vi.fn(async () => ({ item: null })) });
    const screen = new QueueScreen(root, client, "dr-a");
    await screen.load();
    expect(root.querySelector(".empty-queue")).not.toBeNull();
  });
});
