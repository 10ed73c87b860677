// Escape + highlight helpers for rendering source excerpts.

export function escapeHtml(text: string): string {
  return text
    .replaceAll("&", "&amp;")
    .replaceAll("<", "&lt;")
    .replaceAll(">", "&gt;")
    .replaceAll('"', "&quot;");
}

const REGEX_SPECIALS = /[.*+?^${}()|[\]\\]/g;

/** Wrap every case-insensitive occurrence of the mentions in <mark>.
 * Single pass over the raw text, so marks never nest. */
export function highlightMentions(text: string, mentions: string[]): string {
  const usable = mentions
    .filter((m) => m.trim().length > 1)
    .sort((a, b) => b.length - a.length)
    .map((m) => m.replace(REGEX_SPECIALS, "\\$&"));
  if (usable.length === 0) return escapeHtml(text);
  const pattern = new RegExp(`(${usable.join("|")})`, "gi");
  return text
    .split(pattern)
    .map((part, i) => (i % 2 === 1 ? `<mark>${escapeHtml(part)}</mark>` : escapeHtml(part)))
    .join("");
}
