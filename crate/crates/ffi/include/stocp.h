#ifndef STOCP_H
#define STOCP_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum StocpMethod {
  STOCP_METHOD_SADDLE_GMRES_ILU0 = 0,
  STOCP_METHOD_SCHUR_CG = 1,
} StocpMethod;

typedef enum StocpStatus {
  STOCP_STATUS_OK = 0,
  STOCP_STATUS_NULL_POINTER = 1,
  STOCP_STATUS_INVALID_ARGUMENT = 2,
  STOCP_STATUS_DIMENSION_MISMATCH = 3,
  STOCP_STATUS_NOT_CONVERGED = 4,
  STOCP_STATUS_NUMERICAL = 5,
  STOCP_STATUS_BUFFER_TOO_SMALL = 6,
  STOCP_STATUS_INTERNAL = 7,
} StocpStatus;

/**
 * Opaque mesh handle.
 */
typedef struct StocpMesh StocpMesh;

/**
 * Opaque problem handle.
 */
typedef struct StocpProblem StocpProblem;

/**
 * Opaque solution handle.
 */
typedef struct StocpSolution StocpSolution;

typedef struct StocpSolveReport {
  size_t iterations;
  double achieved_relative_residual;
  double true_relative_residual;
  bool converged;
  double wall_time_s;
} StocpSolveReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *stocp_version(void);

/**
 * Message of the last failed call on this thread; empty after a success.
 * Valid until the next call on this thread.
 */
const char *stocp_last_error(void);

/**
 * Static description of a status code.
 */
const char *stocp_status_string(enum StocpStatus status);

/**
 * Kuhn triangulation of `(0,1)^dim` with `cells` cells per axis.
 */
enum StocpStatus stocp_mesh_kuhn(size_t dim, size_t cells, struct StocpMesh **mesh);

/**
 * One uniform refinement halving the mesh size; `refined` receives a new
 * handle.
 */
enum StocpStatus stocp_mesh_refine_uniform(const struct StocpMesh *mesh,
                                           struct StocpMesh **refined);

void stocp_mesh_free(struct StocpMesh *mesh);

/**
 * Zero for a null handle.
 */
size_t stocp_mesh_dim(const struct StocpMesh *mesh);

/**
 * Zero for a null handle.
 */
size_t stocp_mesh_n_vertices(const struct StocpMesh *mesh);

/**
 * Zero for a null handle.
 */
size_t stocp_mesh_n_simplices(const struct StocpMesh *mesh);

/**
 * Copies the vertex coordinates, `dim` values per vertex.
 */
enum StocpStatus stocp_mesh_vertices(const struct StocpMesh *mesh, double *buf, size_t len);

/**
 * Assembles the optimality system on a copy of `mesh`. `target` is one of
 * `smooth`, `hat`, `cube`, `noisy`; `delta` is the noise level of `noisy`
 * and ignored otherwise.
 */
enum StocpStatus stocp_problem_new(const struct StocpMesh *mesh,
                                   double rho,
                                   const char *target,
                                   double delta,
                                   struct StocpProblem **problem);

void stocp_problem_free(struct StocpProblem *problem);

/**
 * Numbers of state and adjoint unknowns.
 */
enum StocpStatus stocp_problem_dofs(const struct StocpProblem *problem,
                                    size_t *n_state,
                                    size_t *n_adjoint);

/**
 * Solves the optimality system. `tol <= 0` keeps the default tolerance.
 * A solve that stops without converging returns `NOT_CONVERGED` and still
 * stores the last iterate in `solution`.
 */
enum StocpStatus stocp_problem_solve(const struct StocpProblem *problem,
                                     enum StocpMethod method,
                                     double tol,
                                     struct StocpSolution **solution);

void stocp_solution_free(struct StocpSolution *solution);

enum StocpStatus stocp_solution_report(const struct StocpSolution *solution,
                                       struct StocpSolveReport *report);

/**
 * Copies the state unknowns (length: state unknowns).
 */
enum StocpStatus stocp_solution_state(const struct StocpSolution *solution,
                                      double *buf,
                                      size_t len);

/**
 * Copies the adjoint unknowns (length: adjoint unknowns).
 */
enum StocpStatus stocp_solution_adjoint(const struct StocpSolution *solution,
                                        double *buf,
                                        size_t len);

/**
 * Copies the nodal control (length: adjoint unknowns).
 */
enum StocpStatus stocp_solution_control(const struct StocpSolution *solution,
                                        double *buf,
                                        size_t len);

/**
 * Copies the state on all mesh vertices, zero where constrained.
 */
enum StocpStatus stocp_solution_state_on_vertices(const struct StocpProblem *problem,
                                                  const struct StocpSolution *solution,
                                                  double *buf,
                                                  size_t len);

/**
 * Evaluates the discrete state at a point of the cylinder.
 */
enum StocpStatus stocp_solution_evaluate(const struct StocpProblem *problem,
                                         const struct StocpSolution *solution,
                                         const double *point,
                                         size_t dim,
                                         double *value);

/**
 * `||u_h - u_bar||_{L2(Q)}` against the noise-free target. `depth` is the
 * subdivision depth used where the target is not smooth.
 */
enum StocpStatus stocp_solution_l2_error(const struct StocpProblem *problem,
                                         const struct StocpSolution *solution,
                                         size_t depth,
                                         double *error);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STOCP_H */
