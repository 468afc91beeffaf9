import { ApiClient, ApiError } from "./api.js";
import {
  Draft,
  canSave,
  clearMark,
  draftFromAnnotation,
  emptyDraft,
  segments,
  setMark,
  toAnnotation,
  validate,
} from "./draft.js";
import { Scrubber, stepForKey } from "./scrubber.js";
import { MARK_KINDS, MarkKind, VideoInfo } from "./types.js";

const MARK_LABELS: Record<MarkKind, string> = {
  first_appearance: "First appearance",
  ccm: "CCM (doubt begins)",
  scm: "SCM (offense certain)",
};

const MARK_KEYS: Record<string, MarkKind> = {
  f: "first_appearance",
  c: "ccm",
  s: "scm",
};

const SEGMENT_COLORS: Record<string, string> = {
  "pre-crime": "#4a90d9",
  suspicious: "#e0a030",
  evidence: "#d05050",
};

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className = "",
  text = "",
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text) node.textContent = text;
  return node;
}

class App {
  private api = new ApiClient();
  private videos: VideoInfo[] = [];
  private video: VideoInfo | null = null;
  private scrubber: Scrubber | null = null;
  private draft: Draft = emptyDraft();

  private list = document.getElementById("video-list") as HTMLUListElement;
  private frameImg = document.getElementById("frame") as HTMLImageElement;
  private slider = document.getElementById("slider") as HTMLInputElement;
  private frameLabel = document.getElementById("frame-label") as HTMLElement;
  private segmentBar = document.getElementById("segment-bar") as HTMLElement;
  private marksBox = document.getElementById("marks") as HTMLElement;
  private problemsBox = document.getElementById("problems") as HTMLElement;
  private saveButton = document.getElementById("save") as HTMLButtonElement;
  private statusBox = document.getElementById("status") as HTMLElement;

  async start(): Promise<void> {
    this.videos = await this.api.listVideos();
    this.renderList();
    this.slider.addEventListener("input", () => {
      this.seek(Number(this.slider.value));
    });
    this.saveButton.addEventListener("click", () => void this.save());
    document.addEventListener("keydown", (event) => this.onKey(event));
    if (this.videos.length > 0) await this.select(this.videos[0].id);
  }

  private renderList(): void {
    this.list.replaceChildren();
    for (const video of this.videos) {
      const item = el("li", video.id === this.video?.id ? "selected" : "");
      item.append(
        el("span", "video-id", video.id),
        el("span", "badge", video.annotated ? "annotated" : ""),
      );
      item.addEventListener("click", () => void this.select(video.id));
      this.list.append(item);
    }
  }

  private async select(id: string): Promise<void> {
    this.video = await this.api.getVideo(id);
    this.scrubber = new Scrubber(this.video.frame_count);
    const stored = await this.api.getAnnotation(id);
    this.draft = stored ? draftFromAnnotation(stored) : emptyDraft();
    this.slider.max = String(this.video.frame_count - 1);
    this.status("");
    this.renderList();
    this.seek(0);
  }

  private seek(frame: number): void {
    if (!this.video || !this.scrubber) return;
    const current = this.scrubber.seek(frame);
    this.frameImg.src = this.api.frameUrl(this.video.id, current);
    this.slider.value = String(current);
    this.frameLabel.textContent = `frame ${current} / ${this.video.frame_count - 1}`;
    this.renderAnnotation();
  }

  private onKey(event: KeyboardEvent): void {
    if (!this.scrubber) return;
    const step = stepForKey(event.key, event.shiftKey);
    if (step !== null) {
      event.preventDefault();
      this.seek(this.scrubber.current + step);
      return;
    }
    const kind = MARK_KEYS[event.key.toLowerCase()];
    if (kind) {
      event.preventDefault();
      this.draft = event.shiftKey
        ? clearMark(this.draft, kind)
        : setMark(this.draft, kind, this.scrubber.current);
      this.renderAnnotation();
    }
  }

  private renderAnnotation(): void {
    if (!this.video || !this.scrubber) return;
    const frameCount = this.video.frame_count;

    this.marksBox.replaceChildren();
    for (const kind of MARK_KINDS) {
      const row = el("div", "mark-row");
      row.append(el("span", "mark-name", MARK_LABELS[kind]));
      const value = this.draft[kind];
      row.append(el("span", "mark-value", value === null ? "unset" : String(value)));
      const set = el("button", "", `set to ${this.scrubber.current}`);
      set.addEventListener("click", () => {
        this.draft = setMark(this.draft, kind, this.scrubber!.current);
        this.renderAnnotation();
      });
      const clear = el("button", "", "clear");
      clear.addEventListener("click", () => {
        this.draft = clearMark(this.draft, kind);
        this.renderAnnotation();
      });
      row.append(set, clear);
      this.marksBox.append(row);
    }

    const problems = validate(this.draft, frameCount);
    this.problemsBox.replaceChildren(
      ...problems.map((p) => el("div", "problem", p)),
    );
    this.saveButton.disabled = !canSave(this.draft, frameCount);

    this.segmentBar.replaceChildren();
    for (const seg of segments(this.draft, frameCount)) {
      const span = el("div", "segment");
      span.style.background = SEGMENT_COLORS[seg.name];
      span.style.left = `${(seg.start / frameCount) * 100}%`;
      span.style.width = `${((seg.end - seg.start) / frameCount) * 100}%`;
      span.title = `${seg.name} [${seg.start}, ${seg.end})`;
      this.segmentBar.append(span);
    }
    const cursor = el("div", "cursor");
    cursor.style.left = `${(this.scrubber.current / frameCount) * 100}%`;
    this.segmentBar.append(cursor);
  }

  private async save(): Promise<void> {
    if (!this.video) return;
    try {
      const ann = toAnnotation(
        this.draft,
        this.video.id,
        this.video.frame_count,
        "annotator-ui",
      );
      await this.api.putAnnotation(this.video.id, ann);
      this.video.annotated = true;
      const listed = this.videos.find((v) => v.id === this.video?.id);
      if (listed) listed.annotated = true;
      this.status("saved");
      this.renderList();
    } catch (err) {
      const message =
        err instanceof ApiError ? `rejected (${err.status}): ${err.message}`
        : err instanceof Error ? err.message
        : String(err);
      this.status(message);
    }
  }

  private status(text: string): void {
    this.statusBox.textContent = text;
  }
}

void new App().start();
