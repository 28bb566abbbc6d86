import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    include: ["test/**/*.test.ts"],
    // the end-to-end test builds a synthetic corpus before serving it
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
