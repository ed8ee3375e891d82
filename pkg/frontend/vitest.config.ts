import { defineConfig } from "vitest/config";

export default defineConfig({
  test: {
    environment: "happy-dom",
    include: ["tests/**/*.test.ts"],
    // the end-to-end test trains a small model before the server comes up
    testTimeout: 120_000,
    hookTimeout: 120_000,
  },
});
