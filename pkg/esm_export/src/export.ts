// Orchestration: parse the structure, embed each chain independently, and
// serialize one GDE1 row per retained CA residue in structure order.

import { AlignmentError, EmbeddingProducer } from './embedder.js'
import { writeGde1 } from './gde1.js'
import { chainSequence, parseChains, residueKeys } from './pdb.js'

export interface ExportResult {
  bytes: Uint8Array
  nResidues: number
  dim: number
}

export async function exportEmbeddings(
  structureText: string,
  producer: EmbeddingProducer,
  warn?: (msg: string) => void,
): Promise<ExportResult> {
  const chains = parseChains(structureText)
  const keys = residueKeys(chains)
  const dim = producer.dim
  const values = new Float32Array(keys.length * dim)
  let row = 0
  for (const chain of chains) {
    const sequence = chainSequence(chain, warn)
    const vectors = await producer.embedChain(sequence)
    if (vectors.length !== chain.residues.length) {
      const positions = chain.residues
        .slice(0, 5)
        .map((r) => `${r.chainId}/${r.seq}`)
        .join(', ')
      throw new AlignmentError(
        `chain ${chain.chainId}: ${vectors.length} embedding rows for ` +
          `${chain.residues.length} residues (starting at ${positions})`,
      )
    }
    for (const vec of vectors) {
      values.set(vec, row * dim)
      row += 1
    }
  }
  return { bytes: writeGde1(keys, values, dim), nResidues: keys.length, dim }
}
