export { AlignmentError, EndpointEmbedder, FakeEmbedder } from './embedder.js'
export { exportEmbeddings } from './export.js'
export { fakeEmbeddings } from './fake.js'
export { Gde1FormatError, readGde1, writeGde1 } from './gde1.js'
export { chainSequence, parseChains, residueKeys, StructureParseError } from './pdb.js'
export { parseArgs, run } from './cli.js'
