#ifndef IKIT_H
#define IKIT_H

#include <stddef.h>

#ifdef __cplusplus
extern "C" {
#endif

/* Status codes. Every function returning ikit_status sets the thread-local
 * error string on failure; fetch it with ikit_last_error(). */
typedef enum {
    IKIT_OK = 0,
    IKIT_EINVAL = 1,  /* invalid input or config */
    IKIT_ERUNTIME = 2 /* I/O, network, or internal failure */
} ikit_status;

/* Last error message for the calling thread; empty string when none.
 * Owned by the library, valid until the next failing call on this thread. */
const char * ikit_last_error(void);

/* Frees strings returned through char** out-parameters. */
void ikit_string_free(char * s);

/* Runs one pipeline stage. `stage` is the subcommand spelling: filter-mmc4,
 * filter-pairs, synth, seq, shard-pack, shard-stats, shard-sample, plan,
 * rices, eval, report. `config_json` carries the stage's resolved settings
 * and file paths; `result_json` receives the stage summary (caller frees via
 * ikit_string_free). Pass NULL for result_json to discard the summary. */
ikit_status ikit_run_stage(const char * stage, const char * config_json, char ** result_json);

/* ------------------------------------------------------------------ */
/* Embedding index                                                     */
/* ------------------------------------------------------------------ */

typedef struct ikit_index ikit_index;

/* Opens an index from its vectors file and parallel ids file. */
ikit_status ikit_index_open(const char * vectors_path, const char * ids_path, ikit_index ** out);
void ikit_index_close(ikit_index * index);

ikit_status ikit_index_size(const ikit_index * index, size_t * out);
ikit_status ikit_index_dim(const ikit_index * index, size_t * out);

/* Exact top-k by cosine similarity. Writes a JSON array of
 * {"id": ..., "sim": ...} to result_json (caller frees). */
ikit_status ikit_index_topk(const ikit_index * index, const float * query, size_t dim, size_t k,
                            char ** result_json);

/* ------------------------------------------------------------------ */
/* Stub model server                                                   */
/* ------------------------------------------------------------------ */

typedef struct ikit_stub_server ikit_stub_server;

/* Loads a stub spec file and serves it over the JSON/HTTP wire protocol on
 * localhost. port 0 picks a free port; the bound port is written to
 * bound_port. */
ikit_status ikit_stub_server_start(const char * spec_path, int port, ikit_stub_server ** out,
                                   int * bound_port);
void ikit_stub_server_stop(ikit_stub_server * server);

#ifdef __cplusplus
}
#endif

#endif /* IKIT_H */
