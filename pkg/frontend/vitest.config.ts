import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    // the e2e suite owns a spawned service process; keep files sequential
    fileParallelism: false,
    environment: "node",
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
