// GDE1 binary layout: magic "GDE1"; little-endian u32 row count, u32 width;
// per row a 1-byte chain id and little-endian i32 sequence number; then all
// values as little-endian float32, row-major.

export const GDE1_MAGIC = 'GDE1'

export class Gde1FormatError extends Error {}

export function writeGde1(
  keys: Array<[string, number]>,
  values: Float32Array,
  dim: number,
): Uint8Array {
  const n = keys.length
  if (values.length !== n * dim) {
    throw new Gde1FormatError(`${values.length} values for ${n} rows x ${dim}`)
  }
  const size = 12 + n * 5 + n * dim * 4
  const buf = new ArrayBuffer(size)
  const view = new DataView(buf)
  const bytes = new Uint8Array(buf)
  for (let i = 0; i < 4; i += 1) bytes[i] = GDE1_MAGIC.charCodeAt(i)
  view.setUint32(4, n, true)
  view.setUint32(8, dim, true)
  let off = 12
  for (const [chain, seq] of keys) {
    if (chain.length !== 1) {
      throw new Gde1FormatError(`chain id must be a single character, got ${JSON.stringify(chain)}`)
    }
    bytes[off] = chain.charCodeAt(0)
    view.setInt32(off + 1, seq, true)
    off += 5
  }
  for (let i = 0; i < values.length; i += 1) {
    view.setFloat32(off + i * 4, values[i], true)
  }
  return bytes
}

export interface Gde1Table {
  keys: Array<[string, number]>
  dim: number
  values: Float32Array
}

export function readGde1(data: Uint8Array): Gde1Table {
  const view = new DataView(data.buffer, data.byteOffset, data.byteLength)
  const magic = String.fromCharCode(...data.slice(0, 4))
  if (magic !== GDE1_MAGIC) throw new Gde1FormatError(`bad magic ${magic}`)
  const n = view.getUint32(4, true)
  const dim = view.getUint32(8, true)
  if (data.length !== 12 + n * 5 + n * dim * 4) {
    throw new Gde1FormatError('size disagrees with header')
  }
  const keys: Array<[string, number]> = []
  let off = 12
  for (let i = 0; i < n; i += 1) {
    keys.push([String.fromCharCode(data[off]), view.getInt32(off + 1, true)])
    off += 5
  }
  const values = new Float32Array(n * dim)
  for (let i = 0; i < values.length; i += 1) {
    values[i] = view.getFloat32(off + i * 4, true)
  }
  return { keys, dim, values }
}
