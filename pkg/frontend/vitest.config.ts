import { defineConfig } from "vitest/config";

// The integration test spawns the annotation server on this port; the
// happy-dom window adopts that origin so the app's fetches are same-origin,
// exactly as when `incoforge serve --static` hosts the built assets.
const INTEGRATION_PORT = 21873;

export default defineConfig({
  test: {
    environment: "happy-dom",
    environmentOptions: {
      happyDOM: {
        url: `http://127.0.0.1:${INTEGRATION_PORT}`,
        settings: { fetch: { disableSameOriginPolicy: true } },
      },
    },
    env: {
      ANNOTATION_PORT: String(INTEGRATION_PORT),
    },
    testTimeout: 60_000,
    hookTimeout: 120_000,
  },
});
