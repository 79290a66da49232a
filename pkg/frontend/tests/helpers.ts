import { readFileSync } from 'node:fs';
import { join, resolve } from 'node:path';

import { ApiClient } from '../src/api';

export interface TestContext {
  baseUrl: string;
  sessionId: string;
  manifest: { methods: Record<string, string[]> };
}

export function testContext(): TestContext {
  const path = join(resolve(__dirname, '..'), '.test-runtime', 'context.json');
  return JSON.parse(readFileSync(path, 'utf-8')) as TestContext;
}

export function liveApi(): { api: ApiClient; ctx: TestContext } {
  const ctx = testContext();
  return { api: new ApiClient(ctx.baseUrl), ctx };
}
