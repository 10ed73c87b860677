import { ApiClient } from "./api";
import { DashboardScreen } from "./views/dashboard";
import { BrowserScreen } from "./views/browser";
import { QueueScreen } from "./views/queue";
import "./style.css";

const API_BASE = import.meta.env.VITE_API_BASE ?? "http://127.0.0.1:8123";

function main(): void {
  const app = document.getElementById("app")!;
  app.innerHTML = `
    <header>
      <h1>Indicator graph review</h1>
      <nav>
        <button data-tab="queue" class="active">Review queue</button>
        <button data-tab="dashboard">Dashboard</button>
        <button data-tab="browser">Graph browser</button>
      </nav>
      <div class="session">
        <input id="reviewer" placeholder="reviewer id" value="${localStorage.getItem("reviewer") ?? ""}" />
        <input id="token" type="password" placeholder="bearer token (optional)" />
      </div>
    </header>
    <main>
      <section id="tab-queue"></section>
      <section id="tab-dashboard" hidden></section>
      <section id="tab-browser" hidden></section>
    </main>`;

  const reviewerInput = document.getElementById("reviewer") as HTMLInputElement;
  const tokenInput = document.getElementById("token") as HTMLInputElement;
  const client = new ApiClient(API_BASE, tokenInput.value);
  tokenInput.addEventListener("change", () => client.setToken(tokenInput.value));
  reviewerInput.addEventListener("change", () => localStorage.setItem("reviewer", reviewerInput.value));

  const dashboard = new DashboardScreen(document.getElementById("tab-dashboard")!, client);
  const queue = new QueueScreen(
    document.getElementById("tab-queue")!,
    client,
    reviewerInput.value || "anonymous",
    (stats) => dashboard.renderStats(stats),
  );
  const browser = new BrowserScreen(document.getElementById("tab-browser")!, client);
  browser.render();

  const loaders: Record<string, () => void> = {
    queue: () => void queue.load(),
    dashboard: () => void dashboard.load(),
    browser: () => {},
  };
  for (const button of document.querySelectorAll<HTMLButtonElement>("nav button")) {
    button.addEventListener("click", () => {
      for (const other of document.querySelectorAll("nav button")) other.classList.remove("active");
      button.classList.add("active");
      for (const section of document.querySelectorAll("main section")) {
        (section as HTMLElement).hidden = section.id !== `tab-${button.dataset.tab}`;
      }
      loaders[button.dataset.tab!]!();
    });
  }
  void queue.load();
}

main();
