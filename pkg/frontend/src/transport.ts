/** Transport abstraction: one text line per protocol message. */

export interface Transport {
  send(line: string): void;
  onLine(cb: (line: string) => void): void;
  onClose(cb: () => void): void;
  close(): void;
}

/** Browser transport over the server's WebSocket bridge (port 9001). */
export class WsTransport implements Transport {
  private ws: WebSocket;
  private lineCb: ((line: string) => void) | null = null;
  private closeCb: (() => void) | null = null;

  constructor(url: string, onOpen: () => void, onError: () => void) {
    this.ws = new WebSocket(url);
    this.ws.onopen = () => onOpen();
    this.ws.onerror = () => onError();
    this.ws.onclose = () => this.closeCb?.();
    this.ws.onmessage = (ev: MessageEvent) => {
      const text = typeof ev.data === "string" ? ev.data : "";
      for (const piece of text.split("\n")) {
        if (piece.trim().length > 0) this.lineCb?.(piece);
      }
    };
  }

  send(line: string): void {
    if (this.ws.readyState === WebSocket.OPEN) this.ws.send(line);
  }

  onLine(cb: (line: string) => void): void {
    this.lineCb = cb;
  }

  onClose(cb: () => void): void {
    this.closeCb = cb;
  }

  close(): void {
    this.ws.close();
  }
}

/** In-memory transport for tests: lines pushed by hand. */
export class FakeTransport implements Transport {
  sent: string[] = [];
  private lineCb: ((line: string) => void) | null = null;
  private closeCb: (() => void) | null = null;
  closed = false;

  send(line: string): void {
    this.sent.push(line);
  }

  onLine(cb: (line: string) => void): void {
    this.lineCb = cb;
  }

  onClose(cb: () => void): void {
    this.closeCb = cb;
  }

  close(): void {
    this.closed = true;
  }

  feed(line: string): void {
    this.lineCb?.(line);
  }

  dropConnection(): void {
    this.closeCb?.();
  }
}
