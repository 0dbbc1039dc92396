import { resolveBaseUrl, STORAGE_KEY } from "./config.js";
import { createApp } from "./main.js";

const root = document.getElementById("app");
if (root) {
  const meta = document.querySelector<HTMLMetaElement>('meta[name="dialogsearch-service"]');
  let stored: string | null = null;
  try {
    stored = window.localStorage.getItem(STORAGE_KEY);
  } catch {
    // storage can be unavailable (file:// in some browsers); fall through
  }
  const baseUrl = resolveBaseUrl(window.location.search, stored, meta?.content ?? null);
  try {
    window.localStorage.setItem(STORAGE_KEY, baseUrl);
  } catch {
    // best effort only
  }
  createApp(root, { baseUrl });
}
