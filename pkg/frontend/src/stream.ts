// NDJSON stream client over fetch, with cursor-based reconnects.
// Delivery from the server is at-least-once; the view layer's sequence
// numbers make rendering idempotent, and the client resumes from the
// last seq it saw.

import { parseRecordLine, type TraceRecord } from "./protocol.js";

export type ConnectionStatus = "connecting" | "connected" | "disconnected" | "closed";

export interface StreamOptions {
  baseUrl: string;
  onRecord: (record: TraceRecord) => void;
  onStatus?: (status: ConnectionStatus) => void;
  onError?: (message: string) => void;
  /** Reconnect delay in ms; retries stop after `maxRetries` failures. */
  retryDelayMs?: number;
  maxRetries?: number;
  fetchImpl?: typeof fetch;
}

export class StreamClient {
  private cursor = 0;
  private stopped = false;
  private retries = 0;
  private readonly opts: Required<Pick<StreamOptions, "retryDelayMs" | "maxRetries">> &
    StreamOptions;

  constructor(options: StreamOptions) {
    this.opts = { retryDelayMs: 1000, maxRetries: 10, ...options };
  }

  get nextSeq(): number {
    return this.cursor;
  }

  stop(): void {
    this.stopped = true;
  }

  /** Run the follow loop until the stream ends or `stop()` is called. */
  async run(): Promise<void> {
    const fetchImpl = this.opts.fetchImpl ?? fetch;
    while (!this.stopped && this.retries <= this.opts.maxRetries) {
      this.opts.onStatus?.("connecting");
      try {
        const url = `${this.opts.baseUrl}/stream?since=${this.cursor}&follow=true`;
        const response = await fetchImpl(url);
        if (!response.ok || response.body === null) {
          throw new Error(`stream request failed: ${response.status}`);
        }
        this.opts.onStatus?.("connected");
        this.retries = 0;
        await this.consume(response.body);
        if (!this.stopped) {
          // server closed the stream (run ended)
          this.opts.onStatus?.("closed");
          return;
        }
      } catch (err) {
        this.retries += 1;
        this.opts.onStatus?.("disconnected");
        this.opts.onError?.(String(err));
        await delay(this.opts.retryDelayMs);
      }
    }
  }

  private async consume(body: ReadableStream<Uint8Array>): Promise<void> {
    const reader = body.getReader();
    const decoder = new TextDecoder();
    let buffer = "";
    for (;;) {
      const { done, value } = await reader.read();
      if (done) {
        break;
      }
      buffer += decoder.decode(value, { stream: true });
      let newline = buffer.indexOf("\n");
      while (newline >= 0) {
        const line = buffer.slice(0, newline).trim();
        buffer = buffer.slice(newline + 1);
        if (line) {
          this.deliver(line);
        }
        newline = buffer.indexOf("\n");
      }
      if (this.stopped) {
        await reader.cancel();
        return;
      }
    }
    const rest = buffer.trim();
    if (rest) {
      this.deliver(rest);
    }
  }

  private deliver(line: string): void {
    const record = parseRecordLine(line);
    this.cursor = Math.max(this.cursor, record.seq + 1);
    this.opts.onRecord(record);
  }
}

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}
