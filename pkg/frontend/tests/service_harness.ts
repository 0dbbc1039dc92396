// Boots the real evaluation service for end-to-end tests: trains a small
// model into a temp dir, picks a free port, and waits for /health.

import { type ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, writeFileSync } from "node:fs";
import net from "node:net";
import { tmpdir } from "node:os";
import { join, resolve } from "node:path";

// vitest runs with cwd = frontend/; the package sources sit one level up
const REPO_ROOT = resolve(process.cwd(), "..");
const DATA_DIR = join(REPO_ROOT, "src", "dialogsearch", "data");
export const CORPUS_PATH = join(DATA_DIR, "sample_corpus.txt");
export const PERSONAS_PATH = join(DATA_DIR, "personas.txt");

export interface LiveService {
  baseUrl: string;
  transcriptsPath: string;
  workdir: string;
  stop(): void;
}

export function runCli(args: string[]): { status: number; stdout: string; stderr: string } {
  const result = spawnSync("dialogsearch", args, { encoding: "utf8" });
  if (result.error) throw result.error;
  return { status: result.status ?? -1, stdout: result.stdout, stderr: result.stderr };
}

function freePort(): Promise<number> {
  return new Promise((resolvePort, reject) => {
    const server = net.createServer();
    server.once("error", reject);
    server.listen(0, "127.0.0.1", () => {
      const address = server.address();
      if (address === null || typeof address === "string") {
        reject(new Error("no port assigned"));
        return;
      }
      server.close(() => resolvePort(address.port));
    });
  });
}

function sleep(ms: number): Promise<void> {
  return new Promise((r) => setTimeout(r, ms));
}

export async function startService(seed = 11): Promise<LiveService> {
  const workdir = mkdtempSync(join(tmpdir(), "dialogsearch-ui-"));
  const modelPath = join(workdir, "model.json");
  const transcriptsPath = join(workdir, "eval.jsonl");
  const searchConfigPath = join(workdir, "search.cfg");

  const train = runCli(["train", "--corpus", CORPUS_PATH, "--out", modelPath, "--order", "2"]);
  if (train.status !== 0) throw new Error(`train failed: ${train.stderr}`);

  // small beams keep replies fast; the protocol under test does not care
  writeFileSync(
    searchConfigPath,
    "beam_width = 3\nmax_candidates = 4\nmax_length = 8\niterations = 2\n",
  );

  const port = await freePort();
  const child: ChildProcess = spawn(
    "dialogsearch",
    [
      "serve",
      "--model", modelPath,
      "--personas", PERSONAS_PATH,
      "--transcripts", transcriptsPath,
      "--search-config", searchConfigPath,
      "--port", String(port),
      "--seed", String(seed),
      "--cap", "6",
    ],
    { stdio: ["ignore", "pipe", "pipe"] },
  );
  let log = "";
  child.stdout?.on("data", (chunk) => (log += chunk));
  child.stderr?.on("data", (chunk) => (log += chunk));
  let exited = false;
  child.on("exit", () => (exited = true));

  const baseUrl = `http://127.0.0.1:${port}`;
  const deadline = Date.now() + 30_000;
  for (;;) {
    if (exited) throw new Error(`service exited during startup:\n${log}`);
    try {
      const response = await fetch(`${baseUrl}/health`);
      if (response.ok) break;
    } catch {
      // not listening yet
    }
    if (Date.now() > deadline) {
      child.kill("SIGKILL");
      throw new Error(`service never became healthy:\n${log}`);
    }
    await sleep(100);
  }

  return {
    baseUrl,
    transcriptsPath,
    workdir,
    stop() {
      child.kill("SIGTERM");
    },
  };
}
