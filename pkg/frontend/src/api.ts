import { Annotation, VideoInfo } from "./types.js";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function parseError(resp: Response): Promise<never> {
  let message = `${resp.status} ${resp.statusText}`;
  try {
    const body = await resp.json();
    if (body && typeof body.error === "string") message = body.error;
  } catch {
    // non-JSON error body; keep the status line
  }
  throw new ApiError(resp.status, message);
}

export class ApiClient {
  constructor(private readonly base = "") {}

  private async getJson<T>(path: string): Promise<T> {
    const resp = await fetch(this.base + path);
    if (!resp.ok) await parseError(resp);
    return resp.json() as Promise<T>;
  }

  listVideos(): Promise<VideoInfo[]> {
    return this.getJson("/api/videos");
  }

  getVideo(id: string): Promise<VideoInfo> {
    return this.getJson(`/api/videos/${encodeURIComponent(id)}`);
  }

  frameUrl(id: string, n: number): string {
    return `${this.base}/api/videos/${encodeURIComponent(id)}/frames/${n}`;
  }

  /** Resolves to null when the video has no stored annotation yet. */
  async getAnnotation(id: string): Promise<Annotation | null> {
    const resp = await fetch(
      `${this.base}/api/videos/${encodeURIComponent(id)}/annotation`,
    );
    if (resp.status === 404) return null;
    if (!resp.ok) await parseError(resp);
    return resp.json() as Promise<Annotation>;
  }

  /** Rejects with ApiError(422) when the server refuses the ordering. */
  async putAnnotation(id: string, ann: Annotation): Promise<Annotation> {
    const resp = await fetch(
      `${this.base}/api/videos/${encodeURIComponent(id)}/annotation`,
      {
        method: "PUT",
        headers: { "Content-Type": "application/json" },
        body: JSON.stringify(ann),
      },
    );
    if (!resp.ok) await parseError(resp);
    return resp.json() as Promise<Annotation>;
  }
}
