// Per-chain embedding producers.  The real path talks to an inference
// endpoint over HTTP (the model itself is far too large to run in-process);
// the fake path is deterministic and model-free.

import { fakeEmbeddings } from './fake.js'

export class AlignmentError extends Error {}

export interface EmbeddingProducer {
  /** One vector per residue of the chain sequence. */
  embedChain(sequence: string): Promise<Float32Array[]>
  readonly dim: number
}

export class FakeEmbedder implements EmbeddingProducer {
  private cursor = 0
  constructor(readonly dim: number, private readonly seed: number) {}

  async embedChain(sequence: string): Promise<Float32Array[]> {
    // one flat deterministic stream across all chains, consumed in order
    const rows: Float32Array[] = []
    for (let i = 0; i < sequence.length; i += 1) {
      rows.push(fakeEmbeddings(1, this.dim, this.seed + this.cursor))
      this.cursor += 1
    }
    return rows
  }
}

interface EndpointResponse {
  embeddings: number[][]
}

/**
 * POSTs {model, sequence} to an inference service and expects
 * {embeddings: number[][]} with one row per residue.
 */
export class EndpointEmbedder implements EmbeddingProducer {
  constructor(
    private readonly url: string,
    private readonly model: string,
    readonly dim: number,
  ) {}

  async embedChain(sequence: string): Promise<Float32Array[]> {
    const response = await fetch(this.url, {
      method: 'POST',
      headers: { 'content-type': 'application/json' },
      body: JSON.stringify({ model: this.model, sequence }),
    })
    if (!response.ok) {
      throw new Error(`embedding endpoint returned ${response.status}`)
    }
    const payload = (await response.json()) as EndpointResponse
    if (!Array.isArray(payload.embeddings) || payload.embeddings.length !== sequence.length) {
      const got = Array.isArray(payload.embeddings) ? payload.embeddings.length : 'none'
      throw new AlignmentError(
        `endpoint returned ${got} rows for ${sequence.length} residues`,
      )
    }
    return payload.embeddings.map((row, i) => {
      if (row.length !== this.dim) {
        throw new AlignmentError(`row ${i} has width ${row.length}, expected ${this.dim}`)
      }
      return Float32Array.from(row)
    })
  }
}
