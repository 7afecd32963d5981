import { defineConfig } from "vitest/config";

export default defineConfig({
  build: {
    outDir: "dist",
    // The SPA is served by the API server from a static directory; hashed
    // asset names keep cache busting working across redeploys.
    emptyOutDir: true,
  },
  server: {
    // `vite dev` against a locally running server: forward API calls so the
    // page can use same-origin paths in development too.
    proxy: {
      "/v1": "http://127.0.0.1:8444",
    },
  },
  test: {
    environment: "jsdom",
    include: ["tests/**/*.test.ts"],
    // The integration tests boot a real server per suite; give them room.
    testTimeout: 60_000,
    hookTimeout: 60_000,
  },
});
