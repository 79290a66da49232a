import { defineConfig } from 'vitest/config';

export default defineConfig({
  test: {
    environment: 'jsdom',
    globalSetup: ['tests/setup/server.ts'],
    testTimeout: 30000,
    hookTimeout: 180000,
    fileParallelism: false,
    include: ['tests/**/*.test.ts'],
  },
});
