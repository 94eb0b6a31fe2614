// Deterministic stand-in embeddings for CI and tests: a seeded 32-bit PRNG
// (splitmix32) drives uniform values in [-1, 1), rounded to float32.

function splitmix32(seed: number): () => number {
  let state = seed >>> 0
  return () => {
    state = (state + 0x9e3779b9) >>> 0
    let z = state
    z ^= z >>> 16
    z = Math.imul(z, 0x21f0aaad)
    z ^= z >>> 15
    z = Math.imul(z, 0x735a2d97)
    z ^= z >>> 15
    return (z >>> 0) / 4294967296 // [0, 1)
  }
}

/** Row-major (nRows x dim) fake embedding matrix, fully determined by seed. */
export function fakeEmbeddings(nRows: number, dim: number, seed: number): Float32Array {
  const next = splitmix32(seed)
  const out = new Float32Array(nRows * dim)
  for (let i = 0; i < out.length; i += 1) {
    out[i] = Math.fround(next() * 2 - 1)
  }
  return out
}
