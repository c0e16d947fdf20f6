import type {
  Complete2DResponse,
  Label2D,
  MaskSpec,
  Meta,
  SynthesizeResponse
} from "./types";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly kind: string,
    readonly diagnosticId?: string
  ) {
    super(`${status}: ${kind}${diagnosticId ? ` [${diagnosticId}]` : ""}`);
  }
}

async function post<T>(base: string, path: string, body: unknown): Promise<T> {
  const res = await fetch(base + path, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body)
  });
  if (!res.ok) {
    let kind = res.statusText;
    let diag: string | undefined;
    try {
      const payload = await res.json();
      kind = payload.error ?? kind;
      diag = payload.diagnostic_id ?? undefined;
    } catch {
      /* non-JSON error body */
    }
    throw new ApiError(res.status, kind, diag);
  }
  return (await res.json()) as T;
}

export class PoseClient {
  constructor(readonly base: string = "") {}

  async meta(): Promise<Meta> {
    const res = await fetch(this.base + "/meta");
    if (!res.ok) throw new ApiError(res.status, "meta unavailable");
    return (await res.json()) as Meta;
  }

  synthesize(
    pose: number[],
    mask: MaskSpec,
    kappa: number
  ): Promise<SynthesizeResponse> {
    return post<SynthesizeResponse>(this.base, "/synthesize", {
      v: 1,
      pose,
      mask,
      kappa
    });
  }

  complete2d(labels: Label2D[], kappa: number): Promise<Complete2DResponse> {
    return post<Complete2DResponse>(this.base, "/complete2d", {
      v: 1,
      labels,
      kappa
    });
  }
}
