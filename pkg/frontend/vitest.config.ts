import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    globalSetup: ["tests/fixtures.ts"],
    testTimeout: 60_000,
    hookTimeout: 120_000,
    // One worker: the tests share one service instance and its score log.
    pool: "threads",
    poolOptions: { threads: { singleThread: true } },
    sequence: { concurrent: false },
  },
});
