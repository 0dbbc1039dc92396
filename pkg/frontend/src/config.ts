// Service base URL resolution, in priority order:
//   1. ?service=... query parameter
//   2. localStorage (persisted from a previous ?service= visit)
//   3. <meta name="dialogsearch-service" content="..."> in the page
//   4. the default below
export const DEFAULT_BASE_URL = "http://127.0.0.1:8000";
export const STORAGE_KEY = "dialogsearch.service";

function normalize(url: string): string {
  return url.replace(/\/+$/, "");
}

export function resolveBaseUrl(
  search: string,
  stored: string | null,
  meta: string | null,
): string {
  const fromQuery = new URLSearchParams(search).get("service");
  if (fromQuery && fromQuery.trim()) return normalize(fromQuery.trim());
  if (stored && stored.trim()) return normalize(stored.trim());
  if (meta && meta.trim()) return normalize(meta.trim());
  return DEFAULT_BASE_URL;
}
