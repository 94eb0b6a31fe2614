#!/usr/bin/env node
// esm-export: write per-residue embeddings for a structure as a GDE1 file.
//
//   esm-export STRUCTURE --out FILE [--fake --seed N --dim D]
//                                   [--model NAME --endpoint URL --dim D]
//
// --fake produces deterministic model-free embeddings (CI path); the real
// path requires an HTTP inference endpoint serving the configured model.

import { readFileSync, writeFileSync } from 'node:fs'
import process from 'node:process'

import { EmbeddingProducer, EndpointEmbedder, FakeEmbedder } from './embedder.js'
import { exportEmbeddings } from './export.js'
import { StructureParseError } from './pdb.js'

const DEFAULT_MODEL = 'esm2_t33_650M_UR50D'
const DEFAULT_DIM = 1280

interface Args {
  structure: string
  out: string
  fake: boolean
  seed: number
  dim: number
  model: string
  endpoint?: string
}

function usage(message?: string): never {
  if (message) console.error(`error: ${message}`)
  console.error(
    'usage: esm-export STRUCTURE --out FILE [--fake] [--seed N] [--dim D] ' +
      '[--model NAME] [--endpoint URL]',
  )
  process.exit(2)
}

export function parseArgs(argv: string[]): Args {
  const args: Args = {
    structure: '',
    out: '',
    fake: false,
    seed: 0,
    dim: DEFAULT_DIM,
    model: DEFAULT_MODEL,
  }
  for (let i = 0; i < argv.length; i += 1) {
    const arg = argv[i]
    const next = () => {
      i += 1
      if (i >= argv.length) usage(`${arg} needs a value`)
      return argv[i]
    }
    if (arg === '--out') args.out = next()
    else if (arg === '--fake') args.fake = true
    else if (arg === '--seed') args.seed = Number.parseInt(next(), 10)
    else if (arg === '--dim') args.dim = Number.parseInt(next(), 10)
    else if (arg === '--model') args.model = next()
    else if (arg === '--endpoint') args.endpoint = next()
    else if (arg.startsWith('--')) usage(`unknown flag ${arg}`)
    else if (!args.structure) args.structure = arg
    else usage(`unexpected argument ${arg}`)
  }
  if (!args.structure || !args.out) usage('STRUCTURE and --out are required')
  if (!Number.isFinite(args.seed) || !Number.isInteger(args.dim) || args.dim < 1) {
    usage('--seed and --dim must be integers, --dim >= 1')
  }
  return args
}

export async function run(argv: string[]): Promise<number> {
  const args = parseArgs(argv)
  let producer: EmbeddingProducer
  if (args.fake) {
    producer = new FakeEmbedder(args.dim, args.seed)
  } else if (args.endpoint) {
    producer = new EndpointEmbedder(args.endpoint, args.model, args.dim)
  } else {
    console.error(
      'error: the real model path needs --endpoint URL (an inference service ' +
        `for ${args.model}); use --fake for deterministic model-free output`,
    )
    return 2
  }
  let text: string
  try {
    text = readFileSync(args.structure, 'utf8')
  } catch (err) {
    console.error(`error: ${(err as Error).message}`)
    return 2
  }
  try {
    const result = await exportEmbeddings(text, producer, (msg) => {
      console.warn(`warning: ${msg}`)
    })
    writeFileSync(args.out, result.bytes)
    console.log(`${args.out}: ${result.nResidues} residues x ${result.dim}`)
    return 0
  } catch (err) {
    if (err instanceof StructureParseError) {
      console.error(`error: ${err.message}`)
      return 2
    }
    console.error(`error: ${(err as Error).message}`)
    return 1
  }
}

const invokedDirectly =
  process.argv[1] !== undefined &&
  import.meta.url === new URL(`file://${process.argv[1]}`).href

if (invokedDirectly) {
  run(process.argv.slice(2)).then((code) => process.exit(code))
}
