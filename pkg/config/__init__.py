# package 
