// WebSocket wrapper for streamed simulations. Frames are dispatched to the
// handlers strictly in arrival order; the transcript a view renders from
// onAction callbacks is therefore the stream order by construction.

import type { DimensionScore, ServerFrame, SimulationConfig, TranscriptEntry } from "./types.js";

export interface SocketLike {
  send(data: string): void;
  close(): void;
  onopen: ((event?: unknown) => void) | null;
  onmessage: ((event: { data: unknown }) => void) | null;
  onclose: ((event?: unknown) => void) | null;
  onerror: ((event?: unknown) => void) | null;
}

export type SocketFactory = (url: string) => SocketLike;

export interface StreamHandlers {
  onAction?: (entry: TranscriptEntry) => void;
  onEval?: (score: DimensionScore) => void;
  onError?: (reason: string) => void;
  onFinish?: (episodePk: string, termination: { reason: string }) => void;
  onClose?: () => void;
}

const defaultFactory: SocketFactory = (url) =>
  new WebSocket(url) as unknown as SocketLike;

export class SimulationStream {
  private socket: SocketLike | null = null;
  private finished = false;

  constructor(
    private url: string,
    private handlers: StreamHandlers,
    private factory: SocketFactory = defaultFactory,
  ) {}

  start(config: SimulationConfig): void {
    const socket = this.factory(this.url);
    this.socket = socket;
    socket.onopen = () => {
      socket.send(JSON.stringify({ type: "START_SIM", payload: config }));
    };
    socket.onmessage = (event) => {
      let frame: ServerFrame;
      try {
        frame = JSON.parse(String(event.data)) as ServerFrame;
      } catch {
        this.handlers.onError?.("unparseable frame from server");
        return;
      }
      this.dispatch(frame);
    };
    socket.onclose = () => {
      this.socket = null;
      this.handlers.onClose?.();
    };
    socket.onerror = () => {
      if (!this.finished) {
        this.handlers.onError?.("connection error");
      }
    };
  }

  private dispatch(frame: ServerFrame): void {
    switch (frame.type) {
      case "SERVER_ACTION":
        this.handlers.onAction?.(frame.payload);
        break;
      case "SERVER_EVAL":
        this.handlers.onEval?.(frame.payload);
        break;
      case "ERROR":
        this.handlers.onError?.(frame.payload.reason);
        break;
      case "FINISH_SIM":
        this.finished = true;
        this.handlers.onFinish?.(frame.payload.episode_pk, frame.payload.termination);
        break;
    }
  }

  close(): void {
    this.socket?.close();
    this.socket = null;
  }
}
