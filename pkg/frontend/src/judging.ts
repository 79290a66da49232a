// Pairwise judging queue. Method identity stays hidden from the task model
// (and therefore from the DOM) until a verdict has been accepted by the
// server; the schedule position is server-held, so a refresh resumes where
// the judge left off.

import type { ApiClient } from './api';
import { DIMENSION_RUBRICS, type Dimension, type SchedulePair } from './types';

export interface JudgingTask {
  // method-blind presentation of one schedule slot
  dimension: Dimension;
  rubric: string;
  index: number;
  position: number; // 1-based position in the remaining queue
  total: number;
  imageA: string;
  imageB: string;
}

export interface RevealedVerdict {
  index: number;
  winner: 'A' | 'B';
  methodA: string;
  methodB: string;
}

function blindTask(pair: SchedulePair, position: number, total: number): JudgingTask {
  return {
    dimension: pair.dimension as Dimension,
    rubric: DIMENSION_RUBRICS[pair.dimension as Dimension] ?? pair.dimension,
    index: pair.index,
    position,
    total,
    imageA: pair.image_a,
    imageB: pair.image_b,
  };
}

export class JudgingQueue {
  private pairs: SchedulePair[] = [];
  private judged = new Set<number>();
  readonly revealed: RevealedVerdict[] = [];

  constructor(
    private api: ApiClient,
    readonly dimension: Dimension,
    readonly judge: string
  ) {}

  async load(): Promise<void> {
    const response = await this.api.schedule(this.dimension);
    this.pairs = response.pairs;
    this.judged = new Set(response.judged);
  }

  get total(): number {
    return this.pairs.length;
  }

  get completed(): number {
    return this.judged.size;
  }

  get done(): boolean {
    return this.pairs.length > 0 && this.judged.size >= this.pairs.length;
  }

  /** Participation progress toward the >=10-comparisons-per-image guarantee. */
  progress(): { judged: number; total: number; fraction: number } {
    const total = this.pairs.length;
    return {
      judged: this.judged.size,
      total,
      fraction: total === 0 ? 0 : this.judged.size / total,
    };
  }

  /** The next method-blind task, or null when the queue is complete. */
  current(): JudgingTask | null {
    const pending = this.pairs.filter((p) => !this.judged.has(p.index));
    if (pending.length === 0) return null;
    return blindTask(pending[0], this.judged.size + 1, this.pairs.length);
  }

  async submit(winner: 'A' | 'B'): Promise<RevealedVerdict> {
    const task = this.current();
    if (task === null) throw new Error('judging queue is complete');
    await this.api.submitVerdict({
      dimension: this.dimension,
      index: task.index,
      winner,
      judge: this.judge,
    });
    this.judged.add(task.index);
    // method identity may be revealed only now, after the POST succeeded
    const pair = this.pairs.find((p) => p.index === task.index)!;
    const verdict: RevealedVerdict = {
      index: task.index,
      winner,
      methodA: pair.method_a,
      methodB: pair.method_b,
    };
    this.revealed.push(verdict);
    return verdict;
  }

  /** Per-dimension completion summary (counts only; identities stay out). */
  summary(): { dimension: string; judged: number; total: number } {
    return { dimension: this.dimension, judged: this.judged.size, total: this.pairs.length };
  }
}
