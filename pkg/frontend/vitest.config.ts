import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["tests/**/*.test.ts"],
    // Parity tests shell out to the Python CLI many times; generous budgets
    // keep them reliable on single-core CI hosts.
    testTimeout: 300_000,
    hookTimeout: 300_000,
    pool: "forks",
  },
});
