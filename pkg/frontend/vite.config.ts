import { defineConfig } from "vite";

export default defineConfig({
  base: "./",
  server: {
    proxy: {
      "/synthesize": "http://127.0.0.1:8571",
      "/complete2d": "http://127.0.0.1:8571",
      "/meta": "http://127.0.0.1:8571"
    }
  },
  build: { outDir: "dist" }
});
