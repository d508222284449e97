void k3mm(float E[13][11], in float A[13][17], in float B[17][11],
          float F[11][19], in float C[11][23], in float D[23][19],
          out float G[13][19]) {
  for (int i = 0; i < 13; i++)
    for (int j = 0; j < 11; j++) {
      E[i][j] = 0;
      for (int k = 0; k < 17; k++)
        E[i][j] += A[i][k] * B[k][j];
    }
  for (int i = 0; i < 11; i++)
    for (int j = 0; j < 19; j++) {
      F[i][j] = 0;
      for (int k = 0; k < 23; k++)
        F[i][j] += C[i][k] * D[k][j];
    }
  for (int i = 0; i < 13; i++)
    for (int j = 0; j < 19; j++) {
      G[i][j] = 0;
      for (int k = 0; k < 11; k++)
        G[i][j] += E[i][k] * F[k][j];
    }
}
